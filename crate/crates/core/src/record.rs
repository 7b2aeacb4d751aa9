//! Line-oriented text records, one per `(rho, J)`:
//!
//! ```text
//! p=5 f=2 r=1,2 alpha=3,4 beta=1,2 x=0,9 theta=7 J=0 xJ=12
//! ```
//!
//! Vectors are comma separated, field elements are their integer codes,
//! `J` lists positions (`-` for the empty set) and `xJ` is `none` when `J` is
//! not admissible. Further `key=value` pairs are preserved in order.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::exactnum::{WittElem, WittRing};
use crate::ffield::Fe;
use crate::rhobar::{GenericRho, RhoContext, RhoError, SubsetJ};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecordError {
    #[error("missing field {0}")]
    Missing(&'static str),
    #[error("malformed field {key}: {value}")]
    Malformed { key: String, value: String },
    #[error(transparent)]
    Rho(#[from] RhoError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RhoRecord {
    pub p: u32,
    pub f: u32,
    pub r: Vec<u32>,
    pub alpha: Vec<Fe>,
    pub beta: Vec<Fe>,
    pub x: Vec<Fe>,
    pub theta: u64,
    pub j: SubsetJ,
    pub xj: Option<Fe>,
    pub extra: Vec<(String, String)>,
}

impl RhoRecord {
    pub fn new(rho: &GenericRho, j: SubsetJ) -> RhoRecord {
        RhoRecord {
            p: rho.p(),
            f: rho.f(),
            r: rho.r().to_vec(),
            alpha: rho.alpha().to_vec(),
            beta: rho.beta().to_vec(),
            x: rho.x().to_vec(),
            theta: rho.t(),
            j,
            xj: rho.x_invariant(j).ok(),
            extra: Vec::new(),
        }
    }

    /// Append the data of the strongly divisible module of type `J`.
    pub fn with_module(mut self, ring: &WittRing, a: &[WittElem], alpha: WittElem, alpha_p: WittElem) -> RhoRecord {
        let w = |e: &WittElem| witt_text(ring, e);
        self.extra.push(("a".into(), a.iter().map(w).collect::<Vec<_>>().join(",")));
        self.extra.push(("alpha_lift".into(), w(&alpha)));
        self.extra.push(("alpha_prime_lift".into(), w(&alpha_p)));
        self
    }

    pub fn push(mut self, key: &str, value: impl fmt::Display) -> RhoRecord {
        self.extra.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.extra.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_rho(&self) -> Result<GenericRho, RecordError> {
        let ctx = RhoContext::new(self.p, self.f)?;
        Ok(GenericRho::new_extended(
            ctx,
            self.r.clone(),
            self.alpha.clone(),
            self.beta.clone(),
            self.x.clone(),
            self.theta as i64,
        )?)
    }
}

/// Coefficients of a Witt element on the basis `1, y, ..., y^{m-1}`, colon separated.
pub fn witt_text(ring: &WittRing, e: &WittElem) -> String {
    e.c[..ring.degree()].iter().map(|c| c.to_string()).collect::<Vec<_>>().join(":")
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for RhoRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "p={} f={} r={} alpha={} beta={} x={} theta={} J={} xJ={}",
            self.p,
            self.f,
            join(&self.r),
            join(&self.alpha),
            join(&self.beta),
            join(&self.x),
            self.theta,
            self.j,
            self.xj.map_or("none".to_string(), |v| v.to_string())
        )?;
        for (k, v) in &self.extra {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, RecordError> {
    v.parse().map_err(|_| RecordError::Malformed {
        key: key.into(),
        value: v.into(),
    })
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, RecordError> {
    v.split(',').map(|s| parse_num(key, s)).collect()
}

impl FromStr for RhoRecord {
    type Err = RecordError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let mut fields: Vec<(String, String)> = Vec::new();
        for tok in line.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| RecordError::Malformed {
                key: tok.into(),
                value: String::new(),
            })?;
            fields.push((k.into(), v.into()));
        }
        let take = |key: &'static str| -> Result<String, RecordError> {
            fields
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.clone())
                .ok_or(RecordError::Missing(key))
        };
        let j_text = take("J")?;
        let j = if j_text == "-" {
            SubsetJ::empty()
        } else {
            SubsetJ::from_positions(&parse_list::<u32>("J", &j_text)?)
        };
        let xj_text = take("xJ")?;
        let known = ["p", "f", "r", "alpha", "beta", "x", "theta", "J", "xJ"];
        Ok(RhoRecord {
            p: parse_num("p", &take("p")?)?,
            f: parse_num("f", &take("f")?)?,
            r: parse_list("r", &take("r")?)?,
            alpha: parse_list("alpha", &take("alpha")?)?,
            beta: parse_list("beta", &take("beta")?)?,
            x: parse_list("x", &take("x")?)?,
            theta: parse_num("theta", &take("theta")?)?,
            j,
            xj: if xj_text == "none" { None } else { Some(parse_num("xJ", &xj_text)?) },
            extra: fields.into_iter().filter(|(k, _)| !known.contains(&k.as_str())).collect(),
        })
    }
}
