use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use super::{Expr, Rational, TermKey};

/// Machine-readable form of one term; rationals are written as `"p/q"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TermDump {
    pub coeff: String,
    pub lam_pow: i32,
    pub w_pow: u32,
    pub exp_rate: String,
    pub transform_rates: Vec<String>,
    pub moment_orders: Vec<u32>,
    pub mixed_factors: Vec<(u32, String)>,
    pub c_pow: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExprDump {
    pub terms: Vec<TermDump>,
}

impl Expr {
    pub fn dump(&self) -> ExprDump {
        ExprDump {
            terms: self
                .terms()
                .map(|(k, c)| TermDump {
                    coeff: c.to_string(),
                    lam_pow: k.lam_pow,
                    w_pow: k.w_pow,
                    exp_rate: k.exp_rate.to_string(),
                    transform_rates: k.transform_rates.iter().map(|r| r.to_string()).collect(),
                    moment_orders: k.moment_orders.clone(),
                    mixed_factors: k.mixed_factors.iter().map(|(j, r)| (*j, r.to_string())).collect(),
                    c_pow: k.c_pow,
                })
                .collect(),
        }
    }
}

fn rate_times_lambda(r: &Rational) -> String {
    if r.is_one() {
        "λ".to_string()
    } else {
        format!("{r}λ")
    }
}

fn factors(k: &TermKey) -> Vec<String> {
    let mut out = Vec::new();
    match k.lam_pow {
        0 => {}
        1 => out.push("λ".into()),
        p => out.push(format!("λ^{p}")),
    }
    match k.w_pow {
        0 => {}
        1 => out.push("w".into()),
        p => out.push(format!("w^{p}")),
    }
    if !k.exp_rate.is_zero() {
        out.push(format!("e^(-{}w)", rate_times_lambda(&k.exp_rate)));
    }
    for q in &k.transform_rates {
        out.push(format!("S~({})", rate_times_lambda(q)));
    }
    for j in &k.moment_orders {
        out.push(if *j == 1 { "E[S]".into() } else { format!("E[S^{j}]") });
    }
    for (j, s) in &k.mixed_factors {
        out.push(format!("E[S^{j} e^(-{}S)]", rate_times_lambda(s)));
    }
    match k.c_pow {
        0 => {}
        1 => out.push("C".into()),
        p => out.push(format!("C^{p}")),
    }
    out
}

impl fmt::Display for Expr {
    /// One term per line in canonical order, e.g. `- 1/2 · λ^-2 · e^(-2λw)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (k, c)) in self.terms().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            let sign = if c.is_negative() { "-" } else { "+" };
            let mut parts = vec![c.abs().to_string()];
            parts.extend(factors(k));
            write!(f, "{sign} {}", parts.join(" · "))?;
        }
        Ok(())
    }
}
