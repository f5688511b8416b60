use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Logistic function, evaluated on the side that cannot overflow.
#[inline]
pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// `log(p / (1 - p))`.
#[inline]
pub fn logit<S: Scalar>(p: S) -> S {
    p.ln() - (S::one() - p).ln()
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn softplus<S: Scalar>(x: S) -> S {
    if x > S::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Softmax restricted to entries where `mask` is true; masked-out entries are zero.
pub fn masked_softmax<S: Scalar>(logits: &[S], mask: &[bool]) -> Result<Vec<S>> {
    if logits.len() != mask.len() {
        return Err(Error::Shape(format!(
            "masked_softmax: {} logits, {} mask entries",
            logits.len(),
            mask.len()
        )));
    }
    let mut out = vec![S::zero(); logits.len()];
    masked_softmax_into(logits, mask, &mut out)?;
    Ok(out)
}

fn masked_softmax_into<S: Scalar>(logits: &[S], mask: &[bool], out: &mut [S]) -> Result<()> {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .fold(None, |acc: Option<S>, l| Some(acc.map_or(l, |a| a.max(l))))
        .ok_or(Error::EmptyNeighborhood)?;
    let mut total = S::zero();
    for ((o, &l), &m) in out.iter_mut().zip(logits).zip(mask) {
        *o = if m {
            let e = (l - max).exp();
            total += e;
            e
        } else {
            S::zero()
        };
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    Ok(())
}

/// Node-wise function applied after neighborhood aggregation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    #[default]
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(S::zero()),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output `y = apply(x)`.
    #[inline]
    pub fn derivative_from_output<S: Scalar>(self, y: S) -> S {
        match self {
            Activation::Tanh => S::one() - y * y,
            Activation::Relu => {
                if y > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Activation::Identity => S::one(),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Self::Tanh),
            "relu" => Ok(Self::Relu),
            "identity" => Ok(Self::Identity),
            other => Err(Error::InvalidArgument(format!(
                "unknown activation '{other}'"
            ))),
        }
    }
}
