//! Closed-form scalar fields on the central dual coordinates `r`.
//!
//! Trees are serialized as nested tagged arrays such as
//! `["sin", ["lin", [1.0]]]`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum ScalarFieldExpr<T> {
    Const(T),
    /// `<a, r>` with `a` in center coordinates.
    Lin(Vec<T>),
    Sum(Vec<ScalarFieldExpr<T>>),
    Prod(Vec<ScalarFieldExpr<T>>),
    Sin(Box<ScalarFieldExpr<T>>),
    Cos(Box<ScalarFieldExpr<T>>),
    Exp(Box<ScalarFieldExpr<T>>),
}

use ScalarFieldExpr as E;

impl<T: Scalar> ScalarFieldExpr<T> {
    pub fn zero() -> Self {
        E::Const(T::zero())
    }

    pub fn constant(c: T) -> Self {
        E::Const(c)
    }

    pub fn lin(coeffs: Vec<T>) -> Self {
        E::Lin(coeffs)
    }

    pub fn sin(self) -> Self {
        E::Sin(Box::new(self))
    }

    pub fn cos(self) -> Self {
        E::Cos(Box::new(self))
    }

    pub fn exp(self) -> Self {
        E::Exp(Box::new(self))
    }

    /// Structural zero test (no evaluation).
    pub fn is_zero(&self) -> bool {
        match self {
            E::Const(c) => *c == T::zero(),
            E::Lin(a) => a.iter().all(|v| *v == T::zero()),
            E::Sum(ts) => ts.iter().all(|t| t.is_zero()),
            E::Prod(ts) => ts.iter().any(|t| t.is_zero()),
            _ => false,
        }
    }

    /// `self + other`, dropping structural zeros.
    pub fn plus(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let mut terms = Vec::new();
        for t in [self, other] {
            match t {
                E::Sum(ts) => terms.extend(ts.iter().cloned()),
                t => terms.push(t.clone()),
            }
        }
        E::Sum(terms)
    }

    /// `c * self`, folded into constants and linear forms where possible.
    pub fn scaled(&self, c: T) -> Self {
        if c == T::one() {
            return self.clone();
        }
        if c == T::zero() || self.is_zero() {
            return Self::zero();
        }
        match self {
            E::Const(v) => E::Const(*v * c),
            E::Lin(a) => E::Lin(a.iter().map(|v| *v * c).collect()),
            E::Sum(ts) => E::Sum(ts.iter().map(|t| t.scaled(c)).collect()),
            t => E::Prod(vec![E::Const(c), t.clone()]),
        }
    }

    pub fn neg(&self) -> Self {
        self.scaled(-T::one())
    }

    pub fn eval(&self, r: &[T]) -> T {
        match self {
            E::Const(c) => *c,
            E::Lin(a) => a.iter().zip(r).map(|(x, y)| *x * *y).sum(),
            E::Sum(ts) => ts.iter().map(|t| t.eval(r)).sum(),
            E::Prod(ts) => ts.iter().fold(T::one(), |p, t| p * t.eval(r)),
            E::Sin(t) => t.eval(r).sin(),
            E::Cos(t) => t.eval(r).cos(),
            E::Exp(t) => t.eval(r).exp(),
        }
    }

    /// Largest linear-form length appearing in the tree.
    pub fn arity(&self) -> usize {
        match self {
            E::Const(_) => 0,
            E::Lin(a) => a.len(),
            E::Sum(ts) | E::Prod(ts) => ts.iter().map(|t| t.arity()).max().unwrap_or(0),
            E::Sin(t) | E::Cos(t) | E::Exp(t) => t.arity(),
        }
    }

    pub(crate) fn check_arity(&self, m: usize) -> Result<()> {
        let mut bad = None;
        self.visit(&mut |e| {
            if let E::Lin(a) = e {
                if a.len() != m {
                    bad = Some(a.len());
                }
            }
        });
        match bad {
            Some(got) => Err(Error::DimensionMismatch { expected: m, got }),
            None => Ok(()),
        }
    }

    fn visit(&self, f: &mut impl FnMut(&Self)) {
        f(self);
        match self {
            E::Sum(ts) | E::Prod(ts) => ts.iter().for_each(|t| t.visit(f)),
            E::Sin(t) | E::Cos(t) | E::Exp(t) => t.visit(f),
            _ => {}
        }
    }

    /// Upper bound of `|self|` over the box `|r_i| <= half[i]`.
    pub fn bound(&self, half: &[T]) -> T {
        match self {
            E::Const(c) => c.abs(),
            E::Lin(a) => a.iter().zip(half).map(|(x, h)| x.abs() * *h).sum(),
            E::Sum(ts) => ts.iter().map(|t| t.bound(half)).sum(),
            E::Prod(ts) => ts.iter().fold(T::one(), |p, t| p * t.bound(half)),
            E::Sin(t) => t.bound(half).min(T::one()),
            E::Cos(_) => T::one(),
            E::Exp(t) => t.bound(half).exp(),
        }
    }

    /// False when some `exp` has an argument that grows without bound in `r`
    /// (a linear form not shielded by `sin`/`cos`).
    pub fn is_bounded(&self) -> bool {
        fn grows<T: Scalar>(e: &ScalarFieldExpr<T>) -> bool {
            match e {
                E::Const(_) => false,
                E::Lin(a) => a.iter().any(|v| *v != T::zero()),
                E::Sum(ts) | E::Prod(ts) => ts.iter().any(grows),
                E::Sin(_) | E::Cos(_) => false,
                E::Exp(t) => grows(t),
            }
        }
        let mut ok = true;
        self.visit(&mut |e| {
            if let E::Exp(t) = e {
                ok &= !grows(t);
            }
        });
        ok
    }

    pub fn to_json(&self) -> Value {
        let f = |v: T| v.to_f64_lossy();
        match self {
            E::Const(c) => json!(["const", f(*c)]),
            E::Lin(a) => json!(["lin", a.iter().map(|v| f(*v)).collect::<Vec<_>>()]),
            E::Sum(ts) | E::Prod(ts) => {
                let tag = if matches!(self, E::Sum(_)) {
                    "sum"
                } else {
                    "prod"
                };
                let mut out = vec![json!(tag)];
                out.extend(ts.iter().map(|t| t.to_json()));
                Value::Array(out)
            }
            E::Sin(t) => json!(["sin", t.to_json()]),
            E::Cos(t) => json!(["cos", t.to_json()]),
            E::Exp(t) => json!(["exp", t.to_json()]),
        }
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |what: &str| Error::InvalidInput(format!("expression: {what}: {v}"));
        if let Some(c) = v.as_f64() {
            return Ok(E::Const(T::lit(c)));
        }
        let arr = v.as_array().ok_or_else(|| bad("expected tagged array"))?;
        let tag = arr
            .first()
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing tag"))?;
        let rest = &arr[1..];
        let one = || -> Result<Box<Self>> {
            match rest {
                [x] => Ok(Box::new(Self::from_json(x)?)),
                _ => Err(bad("expected one argument")),
            }
        };
        match tag {
            "const" => match rest {
                [x] => x
                    .as_f64()
                    .map(|c| E::Const(T::lit(c)))
                    .ok_or_else(|| bad("const")),
                _ => Err(bad("const takes one number")),
            },
            "lin" => match rest {
                [Value::Array(a)] => a
                    .iter()
                    .map(|x| x.as_f64().map(T::lit).ok_or_else(|| bad("lin coefficient")))
                    .collect::<Result<Vec<_>>>()
                    .map(E::Lin),
                _ => Err(bad("lin takes one array")),
            },
            "sum" => rest
                .iter()
                .map(Self::from_json)
                .collect::<Result<_>>()
                .map(E::Sum),
            "prod" => rest
                .iter()
                .map(Self::from_json)
                .collect::<Result<_>>()
                .map(E::Prod),
            "sin" => one().map(E::Sin),
            "cos" => one().map(E::Cos),
            "exp" => one().map(E::Exp),
            other => Err(bad(&format!("unknown tag {other:?}"))),
        }
    }
}

impl<T: Scalar> Serialize for ScalarFieldExpr<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for ScalarFieldExpr<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        Self::from_json(&v).map_err(serde::de::Error::custom)
    }
}
