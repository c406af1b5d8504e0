//! Hash-consed scalar expressions over named chart coordinates.
//!
//! Every [`ScalarExpr`] is a handle into a process-wide append-only arena.
//! Structurally identical nodes are interned once, so equal handles mean
//! equal expressions and shared subexpressions are stored (and evaluated,
//! and differentiated) exactly once. Children always have smaller ids than
//! their parents, which gives a free topological order for evaluation.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{OnceLock, RwLock, RwLockReadGuard, RwLockWriteGuard};

/// Handle to an interned expression node.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScalarExpr(u32);

/// Interned coordinate name.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Symbol(u32);

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> Result<f64, DomainKind> {
        let v = match self {
            Func::Exp => x.exp(),
            Func::Log => {
                if x <= 0.0 {
                    return Err(DomainKind::LogNonPositive);
                }
                x.ln()
            }
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sqrt => {
                if x < 0.0 {
                    return Err(DomainKind::SqrtNegative);
                }
                x.sqrt()
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DomainKind::NonFinite)
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub(crate) enum Node {
    /// `f64` bit pattern; never NaN, `-0.0` normalised to `0.0`.
    Const(u64),
    Var(Symbol),
    Add(ScalarExpr, ScalarExpr),
    Sub(ScalarExpr, ScalarExpr),
    Mul(ScalarExpr, ScalarExpr),
    Div(ScalarExpr, ScalarExpr),
    Neg(ScalarExpr),
    Powi(ScalarExpr, i32),
    Func(Func, ScalarExpr),
}

/// Why an evaluation could not produce a finite value.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DomainKind {
    DivisionByZero,
    LogNonPositive,
    SqrtNegative,
    NonFinite,
    UnboundVariable,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DomainKind::DivisionByZero => "division by zero",
            DomainKind::LogNonPositive => "log of a non-positive value",
            DomainKind::SqrtNegative => "sqrt of a negative value",
            DomainKind::NonFinite => "non-finite intermediate value",
            DomainKind::UnboundVariable => "unbound coordinate",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, thiserror::Error)]
#[error("domain violation: {kind}")]
pub struct DomainError {
    pub kind: DomainKind,
}

const MASK_OVERFLOW: u64 = 1 << 63;

struct Arena {
    nodes: Vec<Node>,
    /// Bitmask of coordinate symbols each node depends on (bit 63: symbol id >= 63).
    var_masks: Vec<u64>,
    index: HashMap<Node, u32>,
    symbols: Vec<String>,
    symbol_index: HashMap<String, Symbol>,
    diff_cache: HashMap<(u32, Symbol), u32>,
}

impl Arena {
    fn new() -> Self {
        let mut arena = Arena {
            nodes: Vec::new(),
            var_masks: Vec::new(),
            index: HashMap::new(),
            symbols: Vec::new(),
            symbol_index: HashMap::new(),
            diff_cache: HashMap::new(),
        };
        // ids 0 and 1 are always the constants 0 and 1
        arena.intern(Node::Const(0f64.to_bits()));
        arena.intern(Node::Const(1f64.to_bits()));
        arena
    }

    fn node(&self, e: ScalarExpr) -> Node {
        self.nodes[e.0 as usize]
    }

    fn mask(&self, e: ScalarExpr) -> u64 {
        self.var_masks[e.0 as usize]
    }

    fn intern(&mut self, node: Node) -> ScalarExpr {
        if let Some(&id) = self.index.get(&node) {
            return ScalarExpr(id);
        }
        let mask = match node {
            Node::Const(_) => 0,
            Node::Var(s) => {
                if s.0 < 63 {
                    1 << s.0
                } else {
                    MASK_OVERFLOW
                }
            }
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                self.mask(a) | self.mask(b)
            }
            Node::Neg(a) | Node::Powi(a, _) | Node::Func(_, a) => self.mask(a),
        };
        let id = u32::try_from(self.nodes.len()).expect("expression arena exhausted");
        self.nodes.push(node);
        self.var_masks.push(mask);
        self.index.insert(node, id);
        ScalarExpr(id)
    }

    fn symbol(&mut self, name: &str) -> Symbol {
        if let Some(&s) = self.symbol_index.get(name) {
            return s;
        }
        let s = Symbol(self.symbols.len() as u32);
        self.symbols.push(name.to_string());
        self.symbol_index.insert(name.to_string(), s);
        s
    }

    fn const_value(&self, e: ScalarExpr) -> Option<f64> {
        match self.node(e) {
            Node::Const(bits) => Some(f64::from_bits(bits)),
            _ => None,
        }
    }

    fn constant(&mut self, v: f64) -> ScalarExpr {
        assert!(!v.is_nan(), "NaN constant in expression");
        let v = if v == 0.0 { 0.0 } else { v };
        self.intern(Node::Const(v.to_bits()))
    }

    fn add(&mut self, a: ScalarExpr, b: ScalarExpr) -> ScalarExpr {
        match (self.const_value(a), self.const_value(b)) {
            (Some(x), Some(y)) => return self.constant(x + y),
            (Some(x), _) if x == 0.0 => return b,
            (_, Some(y)) if y == 0.0 => return a,
            _ => {}
        }
        if let Node::Neg(nb) = self.node(b) {
            return self.sub(a, nb);
        }
        if let Node::Neg(na) = self.node(a) {
            return self.sub(b, na);
        }
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.intern(Node::Add(a, b))
    }

    fn sub(&mut self, a: ScalarExpr, b: ScalarExpr) -> ScalarExpr {
        if a == b {
            return ScalarExpr::ZERO;
        }
        match (self.const_value(a), self.const_value(b)) {
            (Some(x), Some(y)) => return self.constant(x - y),
            (Some(x), _) if x == 0.0 => return self.neg(b),
            (_, Some(y)) if y == 0.0 => return a,
            _ => {}
        }
        if let Node::Neg(nb) = self.node(b) {
            return self.add(a, nb);
        }
        self.intern(Node::Sub(a, b))
    }

    fn mul(&mut self, a: ScalarExpr, b: ScalarExpr) -> ScalarExpr {
        match (self.const_value(a), self.const_value(b)) {
            (Some(x), Some(y)) => return self.constant(x * y),
            (Some(x), _) if x == 0.0 => return ScalarExpr::ZERO,
            (_, Some(y)) if y == 0.0 => return ScalarExpr::ZERO,
            (Some(x), _) if x == 1.0 => return b,
            (_, Some(y)) if y == 1.0 => return a,
            (Some(x), _) if x == -1.0 => return self.neg(b),
            (_, Some(y)) if y == -1.0 => return self.neg(a),
            _ => {}
        }
        match (self.node(a), self.node(b)) {
            (Node::Neg(x), Node::Neg(y)) => return self.mul(x, y),
            (Node::Neg(x), _) => {
                let p = self.mul(x, b);
                return self.neg(p);
            }
            (_, Node::Neg(y)) => {
                let p = self.mul(a, y);
                return self.neg(p);
            }
            _ => {}
        }
        if a == b {
            return self.powi(a, 2);
        }
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.intern(Node::Mul(a, b))
    }

    fn div(&mut self, a: ScalarExpr, b: ScalarExpr) -> ScalarExpr {
        match (self.const_value(a), self.const_value(b)) {
            (Some(x), Some(y)) if y != 0.0 => return self.constant(x / y),
            (Some(x), _) if x == 0.0 => return ScalarExpr::ZERO,
            (_, Some(y)) if y == 1.0 => return a,
            (_, Some(y)) if y == -1.0 => return self.neg(a),
            _ => {}
        }
        if let Node::Neg(x) = self.node(a) {
            let q = self.div(x, b);
            return self.neg(q);
        }
        self.intern(Node::Div(a, b))
    }

    fn neg(&mut self, a: ScalarExpr) -> ScalarExpr {
        if let Some(x) = self.const_value(a) {
            return self.constant(-x);
        }
        match self.node(a) {
            Node::Neg(x) => x,
            Node::Sub(x, y) => self.sub(y, x),
            _ => self.intern(Node::Neg(a)),
        }
    }

    fn powi(&mut self, a: ScalarExpr, k: i32) -> ScalarExpr {
        match k {
            0 => return ScalarExpr::ONE,
            1 => return a,
            _ => {}
        }
        if let Some(x) = self.const_value(a) {
            let v = x.powi(k);
            if v.is_finite() {
                return self.constant(v);
            }
        }
        if let Node::Powi(x, j) = self.node(a) {
            if let Some(jk) = j.checked_mul(k) {
                return self.powi(x, jk);
            }
        }
        self.intern(Node::Powi(a, k))
    }

    fn func(&mut self, f: Func, a: ScalarExpr) -> ScalarExpr {
        if let Some(x) = self.const_value(a) {
            if let Ok(v) = f.apply(x) {
                return self.constant(v);
            }
        }
        match (f, self.node(a)) {
            (Func::Log, Node::Func(Func::Exp, x)) => return x,
            (Func::Sqrt, Node::Powi(x, 2)) => {
                // only safe when x is known positive; keep exp(..) case
                if let Node::Func(Func::Exp, _) = self.node(x) {
                    return x;
                }
            }
            _ => {}
        }
        self.intern(Node::Func(f, a))
    }

    fn diff(&mut self, e: ScalarExpr, s: Symbol) -> ScalarExpr {
        let bit = if s.0 < 63 { 1u64 << s.0 } else { MASK_OVERFLOW };
        if self.mask(e) & bit == 0 {
            return ScalarExpr::ZERO;
        }
        if let Some(&d) = self.diff_cache.get(&(e.0, s)) {
            return ScalarExpr(d);
        }
        // Differentiate every reachable node that depends on `s`, children first.
        let mut order = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![e];
        while let Some(x) = stack.pop() {
            if self.mask(x) & bit == 0 || self.diff_cache.contains_key(&(x.0, s)) {
                continue;
            }
            if !seen.insert(x) {
                continue;
            }
            order.push(x);
            match self.node(x) {
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    stack.push(a);
                    stack.push(b);
                }
                Node::Neg(a) | Node::Powi(a, _) | Node::Func(_, a) => stack.push(a),
                Node::Const(_) | Node::Var(_) => {}
            }
        }
        order.sort_unstable();
        for x in order {
            let d = self.diff_node(x, s, bit);
            self.diff_cache.insert((x.0, s), d.0);
        }
        ScalarExpr(self.diff_cache[&(e.0, s)])
    }

    fn cached_diff(&self, e: ScalarExpr, s: Symbol, bit: u64) -> ScalarExpr {
        if self.mask(e) & bit == 0 {
            ScalarExpr::ZERO
        } else {
            ScalarExpr(self.diff_cache[&(e.0, s)])
        }
    }

    fn diff_node(&mut self, x: ScalarExpr, s: Symbol, bit: u64) -> ScalarExpr {
        match self.node(x) {
            Node::Const(_) => ScalarExpr::ZERO,
            Node::Var(v) => {
                if v == s {
                    ScalarExpr::ONE
                } else {
                    ScalarExpr::ZERO
                }
            }
            Node::Add(a, b) => {
                let (da, db) = (self.cached_diff(a, s, bit), self.cached_diff(b, s, bit));
                self.add(da, db)
            }
            Node::Sub(a, b) => {
                let (da, db) = (self.cached_diff(a, s, bit), self.cached_diff(b, s, bit));
                self.sub(da, db)
            }
            Node::Mul(a, b) => {
                let (da, db) = (self.cached_diff(a, s, bit), self.cached_diff(b, s, bit));
                let l = self.mul(da, b);
                let r = self.mul(a, db);
                self.add(l, r)
            }
            Node::Div(a, b) => {
                // (a/b)' = (a' - (a/b) b') / b
                let (da, db) = (self.cached_diff(a, s, bit), self.cached_diff(b, s, bit));
                let t = self.mul(x, db);
                let num = self.sub(da, t);
                self.div(num, b)
            }
            Node::Neg(a) => {
                let da = self.cached_diff(a, s, bit);
                self.neg(da)
            }
            Node::Powi(a, k) => {
                let da = self.cached_diff(a, s, bit);
                let p = self.powi(a, k - 1);
                let c = self.constant(k as f64);
                let cp = self.mul(c, p);
                self.mul(cp, da)
            }
            Node::Func(f, a) => {
                let da = self.cached_diff(a, s, bit);
                let outer = match f {
                    Func::Exp => x,
                    Func::Log => {
                        return self.div(da, a);
                    }
                    Func::Sin => self.func(Func::Cos, a),
                    Func::Cos => {
                        let sn = self.func(Func::Sin, a);
                        self.neg(sn)
                    }
                    Func::Sqrt => {
                        let two = self.constant(2.0);
                        let denom = self.mul(two, x);
                        return self.div(da, denom);
                    }
                };
                self.mul(outer, da)
            }
        }
    }
}

fn arena() -> &'static RwLock<Arena> {
    static ARENA: OnceLock<RwLock<Arena>> = OnceLock::new();
    ARENA.get_or_init(|| RwLock::new(Arena::new()))
}

fn read() -> RwLockReadGuard<'static, Arena> {
    arena().read().unwrap_or_else(|p| p.into_inner())
}

fn write() -> RwLockWriteGuard<'static, Arena> {
    arena().write().unwrap_or_else(|p| p.into_inner())
}

/// Number of nodes interned so far (process-wide).
pub fn arena_len() -> usize {
    read().nodes.len()
}

/// Handle for the node with the given arena id, if it exists.
pub fn expr_by_id(id: usize) -> Option<ScalarExpr> {
    if id < arena_len() {
        Some(ScalarExpr(id as u32))
    } else {
        None
    }
}

impl Symbol {
    pub fn new(name: &str) -> Symbol {
        write().symbol(name)
    }

    pub fn name(self) -> String {
        read().symbols[self.0 as usize].clone()
    }
}

impl ScalarExpr {
    pub const ZERO: ScalarExpr = ScalarExpr(0);
    pub const ONE: ScalarExpr = ScalarExpr(1);

    pub fn constant(v: f64) -> ScalarExpr {
        write().constant(v)
    }

    pub fn var(sym: Symbol) -> ScalarExpr {
        write().intern(Node::Var(sym))
    }

    /// Coordinate by name; interns the name if needed.
    pub fn coord(name: &str) -> ScalarExpr {
        let mut a = write();
        let s = a.symbol(name);
        a.intern(Node::Var(s))
    }

    pub fn id(self) -> usize {
        self.0 as usize
    }

    pub fn as_const(self) -> Option<f64> {
        read().const_value(self)
    }

    pub fn is_zero(self) -> bool {
        self == ScalarExpr::ZERO
    }

    pub fn powi(self, k: i32) -> ScalarExpr {
        write().powi(self, k)
    }

    pub fn apply(self, f: Func) -> ScalarExpr {
        write().func(f, self)
    }

    pub fn exp(self) -> ScalarExpr {
        self.apply(Func::Exp)
    }

    pub fn ln(self) -> ScalarExpr {
        self.apply(Func::Log)
    }

    pub fn sin(self) -> ScalarExpr {
        self.apply(Func::Sin)
    }

    pub fn cos(self) -> ScalarExpr {
        self.apply(Func::Cos)
    }

    pub fn sqrt(self) -> ScalarExpr {
        self.apply(Func::Sqrt)
    }

    /// Exact partial derivative with respect to `sym`.
    pub fn diff(self, sym: Symbol) -> ScalarExpr {
        write().diff(self, sym)
    }

    /// Symbols this expression depends on, ascending.
    pub fn symbols(self) -> Vec<Symbol> {
        let a = read();
        let mask = a.mask(self);
        if mask & MASK_OVERFLOW == 0 {
            return (0..63)
                .filter(|i| mask & (1 << i) != 0)
                .map(Symbol)
                .collect();
        }
        let mut out = std::collections::BTreeSet::new();
        for x in reachable(&a, &[self]) {
            if let Node::Var(s) = a.node(x) {
                out.insert(s);
            }
        }
        out.into_iter().collect()
    }

    pub fn depends_on(self, sym: Symbol) -> bool {
        if sym.0 < 63 {
            read().mask(self) & (1 << sym.0) != 0
        } else {
            self.symbols().contains(&sym)
        }
    }

    /// Number of distinct nodes reachable from this expression.
    pub fn dag_size(self) -> usize {
        dag_size_many(&[self])
    }

    /// Number of nodes of the fully expanded tree (saturating).
    pub fn tree_size(self) -> u64 {
        let a = read();
        let order = reachable(&a, &[self]);
        let mut sizes: HashMap<u32, u64> = HashMap::with_capacity(order.len());
        for x in order {
            let s = match a.node(x) {
                Node::Const(_) | Node::Var(_) => 1,
                Node::Add(p, q) | Node::Sub(p, q) | Node::Mul(p, q) | Node::Div(p, q) => {
                    1u64.saturating_add(sizes[&p.0]).saturating_add(sizes[&q.0])
                }
                Node::Neg(p) | Node::Powi(p, _) | Node::Func(_, p) => {
                    1u64.saturating_add(sizes[&p.0])
                }
            };
            sizes.insert(x.0, s);
        }
        sizes[&self.0]
    }
}

/// Distinct nodes reachable from any of `roots`.
pub fn dag_size_many(roots: &[ScalarExpr]) -> usize {
    let a = read();
    reachable(&a, roots).len()
}

/// Reachable node ids in ascending (topological) order.
fn reachable(a: &Arena, roots: &[ScalarExpr]) -> Vec<ScalarExpr> {
    let mut seen = std::collections::HashSet::new();
    let mut stack: Vec<ScalarExpr> = roots.to_vec();
    let mut out = Vec::new();
    while let Some(x) = stack.pop() {
        if !seen.insert(x) {
            continue;
        }
        out.push(x);
        match a.node(x) {
            Node::Add(p, q) | Node::Sub(p, q) | Node::Mul(p, q) | Node::Div(p, q) => {
                stack.push(p);
                stack.push(q);
            }
            Node::Neg(p) | Node::Powi(p, _) | Node::Func(_, p) => stack.push(p),
            Node::Const(_) | Node::Var(_) => {}
        }
    }
    out.sort_unstable();
    out
}

impl From<f64> for ScalarExpr {
    fn from(v: f64) -> Self {
        ScalarExpr::constant(v)
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $arena:ident) => {
        impl $tr for ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: ScalarExpr) -> ScalarExpr {
                write().$arena(self, rhs)
            }
        }
        impl $tr<f64> for ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: f64) -> ScalarExpr {
                let mut a = write();
                let c = a.constant(rhs);
                a.$arena(self, c)
            }
        }
        impl $tr<ScalarExpr> for f64 {
            type Output = ScalarExpr;
            fn $method(self, rhs: ScalarExpr) -> ScalarExpr {
                let mut a = write();
                let c = a.constant(self);
                a.$arena(c, rhs)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);
binop!(Div, div, div);

impl Neg for ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        write().neg(self)
    }
}

impl std::iter::Sum for ScalarExpr {
    fn sum<I: Iterator<Item = ScalarExpr>>(iter: I) -> ScalarExpr {
        let terms: Vec<ScalarExpr> = iter.collect();
        let mut a = write();
        terms.into_iter().fold(ScalarExpr::ZERO, |acc, t| a.add(acc, t))
    }
}

/// Numeric values bound to coordinate symbols.
#[derive(Clone, Debug, Default)]
pub struct Bindings {
    values: Vec<Option<f64>>,
}

impl Bindings {
    pub fn new(pairs: impl IntoIterator<Item = (Symbol, f64)>) -> Self {
        let mut b = Bindings::default();
        for (s, v) in pairs {
            b.set(s, v);
        }
        b
    }

    pub fn set(&mut self, s: Symbol, v: f64) {
        let i = s.0 as usize;
        if self.values.len() <= i {
            self.values.resize(i + 1, None);
        }
        self.values[i] = Some(v);
    }

    pub fn get(&self, s: Symbol) -> Option<f64> {
        self.values.get(s.0 as usize).copied().flatten()
    }
}

/// Memoising evaluator for one point; shared subexpressions are computed once.
pub struct Evaluator {
    bindings: Bindings,
    cache: HashMap<u32, f64>,
}

impl Evaluator {
    pub fn new(bindings: Bindings) -> Self {
        Evaluator {
            bindings,
            cache: HashMap::new(),
        }
    }

    pub fn bindings(&self) -> &Bindings {
        &self.bindings
    }

    pub fn eval(&mut self, e: ScalarExpr) -> Result<f64, DomainError> {
        if let Some(&v) = self.cache.get(&e.0) {
            return Ok(v);
        }
        let a = read();
        let mut order = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![e];
        while let Some(x) = stack.pop() {
            if self.cache.contains_key(&x.0) || !seen.insert(x) {
                continue;
            }
            order.push(x);
            match a.node(x) {
                Node::Add(p, q) | Node::Sub(p, q) | Node::Mul(p, q) | Node::Div(p, q) => {
                    stack.push(p);
                    stack.push(q);
                }
                Node::Neg(p) | Node::Powi(p, _) | Node::Func(_, p) => stack.push(p),
                Node::Const(_) | Node::Var(_) => {}
            }
        }
        order.sort_unstable();
        for x in order {
            let v = self.eval_node(&a, x)?;
            self.cache.insert(x.0, v);
        }
        Ok(self.cache[&e.0])
    }

    fn eval_node(&self, a: &Arena, x: ScalarExpr) -> Result<f64, DomainError> {
        let get = |e: ScalarExpr| self.cache[&e.0];
        let err = |kind| DomainError { kind };
        let v = match a.node(x) {
            Node::Const(bits) => f64::from_bits(bits),
            Node::Var(s) => self
                .bindings
                .get(s)
                .ok_or(err(DomainKind::UnboundVariable))?,
            Node::Add(p, q) => get(p) + get(q),
            Node::Sub(p, q) => get(p) - get(q),
            Node::Mul(p, q) => get(p) * get(q),
            Node::Div(p, q) => {
                let d = get(q);
                if d == 0.0 {
                    return Err(err(DomainKind::DivisionByZero));
                }
                get(p) / d
            }
            Node::Neg(p) => -get(p),
            Node::Powi(p, k) => {
                let b = get(p);
                if b == 0.0 && k < 0 {
                    return Err(err(DomainKind::DivisionByZero));
                }
                b.powi(k)
            }
            Node::Func(f, p) => f.apply(get(p)).map_err(err)?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(err(DomainKind::NonFinite))
        }
    }
}

/// One-shot evaluation.
pub fn eval(e: ScalarExpr, bindings: &Bindings) -> Result<f64, DomainError> {
    Evaluator::new(bindings.clone()).eval(e)
}

// Printing: infix with minimal parentheses and round-trip constants.

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn fmt_const(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

fn write_expr(a: &Arena, e: ScalarExpr, out: &mut String) -> u8 {
    // returns precedence of what was written
    match a.node(e) {
        Node::Const(bits) => {
            let v = f64::from_bits(bits);
            let s = fmt_const(v);
            out.push_str(&s);
            if v < 0.0 {
                PREC_NEG
            } else {
                PREC_ATOM
            }
        }
        Node::Var(s) => {
            out.push_str(&a.symbols[s.0 as usize]);
            PREC_ATOM
        }
        Node::Add(p, q) => {
            write_operand(a, p, PREC_ADD, out);
            out.push_str(" + ");
            write_operand(a, q, PREC_ADD + 1, out);
            PREC_ADD
        }
        Node::Sub(p, q) => {
            write_operand(a, p, PREC_ADD, out);
            out.push_str(" - ");
            write_operand(a, q, PREC_ADD + 1, out);
            PREC_ADD
        }
        Node::Mul(p, q) => {
            write_operand(a, p, PREC_MUL, out);
            out.push('*');
            write_operand(a, q, PREC_MUL + 1, out);
            PREC_MUL
        }
        Node::Div(p, q) => {
            write_operand(a, p, PREC_MUL, out);
            out.push('/');
            write_operand(a, q, PREC_MUL + 1, out);
            PREC_MUL
        }
        Node::Neg(p) => {
            out.push('-');
            write_operand(a, p, PREC_NEG, out);
            PREC_NEG
        }
        Node::Powi(p, k) => {
            write_operand(a, p, PREC_ATOM, out);
            out.push('^');
            if k < 0 {
                out.push_str(&format!("({k})"));
            } else {
                out.push_str(&k.to_string());
            }
            PREC_POW
        }
        Node::Func(f, p) => {
            out.push_str(f.name());
            out.push('(');
            write_expr(a, p, out);
            out.push(')');
            PREC_ATOM
        }
    }
}

fn write_operand(a: &Arena, e: ScalarExpr, min_prec: u8, out: &mut String) {
    let mut buf = String::new();
    let p = write_expr(a, e, &mut buf);
    if p < min_prec {
        out.push('(');
        out.push_str(&buf);
        out.push(')');
    } else {
        out.push_str(&buf);
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = read();
        let mut s = String::new();
        write_expr(&a, *self, &mut s);
        f.write_str(&s)
    }
}

impl fmt::Debug for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(pairs: &[(&str, f64)]) -> Bindings {
        Bindings::new(pairs.iter().map(|(n, v)| (Symbol::new(n), *v)))
    }

    #[test]
    fn chain_rule_on_exponential() {
        let t = ScalarExpr::coord("t");
        let e = (2.0 * t).exp();
        let d = e.diff(Symbol::new("t"));
        let b = at(&[("t", 0.3)]);
        let want = 2.0 * (0.6f64).exp();
        assert!((eval(d, &b).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn even_function_has_zero_slope_at_origin() {
        let u1 = ScalarExpr::coord("u1");
        let u2 = ScalarExpr::coord("u2");
        let conf = 4.0 / (1.0 + u1.powi(2) + u2.powi(2)).powi(2);
        let d = conf.diff(Symbol::new("u1"));
        assert_eq!(eval(d, &at(&[("u1", 0.0), ("u2", 0.0)])).unwrap(), 0.0);
    }

    #[test]
    fn sine_slope_at_zero() {
        let x = ScalarExpr::coord("x");
        let d = x.sin().diff(Symbol::new("x"));
        assert_eq!(eval(d, &at(&[("x", 0.0)])).unwrap(), 1.0);
    }

    #[test]
    fn hash_consing_shares_nodes() {
        let x = ScalarExpr::coord("x");
        let a = (x + 1.0).sin() * x;
        let b = x * (1.0 + x).sin();
        assert_eq!(a, b);
    }

    #[test]
    fn absorption_rules() {
        let x = ScalarExpr::coord("x");
        assert_eq!(x * 0.0, ScalarExpr::ZERO);
        assert_eq!(x * 1.0, x);
        assert_eq!(x + 0.0, x);
        assert_eq!(x - x, ScalarExpr::ZERO);
        assert_eq!(-(-x), x);
        assert_eq!((ScalarExpr::constant(2.0) * 3.0).as_const(), Some(6.0));
    }

    #[test]
    fn domain_violations_are_errors() {
        let u = ScalarExpr::coord("u");
        let b = at(&[("u", 0.0)]);
        assert_eq!(
            eval(1.0 / u, &b).unwrap_err().kind,
            DomainKind::DivisionByZero
        );
        assert_eq!(eval(u.ln(), &b).unwrap_err().kind, DomainKind::LogNonPositive);
        let b = at(&[("u", -1.0)]);
        assert_eq!(eval(u.sqrt(), &b).unwrap_err().kind, DomainKind::SqrtNegative);
        let q = ScalarExpr::coord("q_unbound_test");
        assert_eq!(
            eval(q, &b).unwrap_err().kind,
            DomainKind::UnboundVariable
        );
    }

    #[test]
    fn quotient_and_sqrt_rules() {
        let x = ScalarExpr::coord("x");
        let f = x.sqrt() / (1.0 + x.powi(2));
        let d = f.diff(Symbol::new("x"));
        let x0: f64 = 0.7;
        let want = 0.5 / x0.sqrt() / (1.0 + x0 * x0) - x0.sqrt() * 2.0 * x0 / (1.0 + x0 * x0).powi(2);
        assert!((eval(d, &at(&[("x", x0)])).unwrap() - want).abs() < 1e-14);
        let g = x.ln().cos();
        let dg = g.diff(Symbol::new("x"));
        let want = -(x0.ln()).sin() / x0;
        assert!((eval(dg, &at(&[("x", x0)])).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn sizes() {
        let x = ScalarExpr::coord("x");
        let s = x.sin();
        let e = s * s.cos() + s;
        assert_eq!(e.dag_size(), 5);
        assert!(e.tree_size() >= 6);
        assert_eq!(ScalarExpr::ZERO.dag_size(), 1);
    }

    #[test]
    fn display_is_readable() {
        let x = ScalarExpr::coord("x");
        let y = ScalarExpr::coord("y");
        let e = (x - y) * (x + 1.0).powi(-2) - (-x).exp();
        let s = e.to_string();
        assert!(s.contains("exp(-x)"), "{s}");
    }
}
