//! Covariate distributions for the simulation studies.
//!
//! Rows are generated in fixed-size blocks, each from its own stream, so a
//! dataset is the same whatever the thread count.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::StreamKey;
use super::SimError;
use crate::linalg::{spd_factorize, Matrix};

/// Rows per generator block.
pub const BLOCK_ROWS: usize = 4096;
/// Blocks generated concurrently before being copied into the output.
const BLOCKS_PER_GROUP: usize = 16;

/// Base dimension of the interaction case.
pub const INTERACTION_BASE: usize = 20;
/// Covariate count of the interaction case: 20 mains, 20 products with
/// `v₁`, and 10 products of `v₂` with `v₁₁…v₂₀`.
pub const INTERACTION_P: usize = 50;

/// Number of mixture components.
pub const MIXTURE_COMPONENTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseTag {
    Normal,
    Lognormal,
    T2,
    Mixture,
    Interactions,
    T1,
}

impl CaseTag {
    pub const ALL: [CaseTag; 6] = [
        Self::Normal,
        Self::Lognormal,
        Self::T2,
        Self::Mixture,
        Self::Interactions,
        Self::T1,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Normal => "normal",
            Self::Lognormal => "lognormal",
            Self::T2 => "t2",
            Self::Mixture => "mixture",
            Self::Interactions => "interactions",
            Self::T1 => "t1",
        }
    }
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown covariate case `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CovarianceSpec {
    /// Unit variances, common correlation `rho`.
    Exchangeable { rho: f64 },
    /// Full matrix given row by row.
    Custom { matrix: Vec<Vec<f64>> },
}

impl Default for CovarianceSpec {
    fn default() -> Self {
        Self::Exchangeable { rho: 0.5 }
    }
}

impl CovarianceSpec {
    pub fn matrix(&self, dim: usize) -> Result<Matrix, SimError> {
        match self {
            Self::Exchangeable { rho } => {
                let mut m = Matrix::identity(dim);
                for j in 0..dim {
                    for i in 0..dim {
                        if i != j {
                            m[(i, j)] = *rho;
                        }
                    }
                }
                Ok(m)
            }
            Self::Custom { matrix } => {
                if matrix.len() != dim || matrix.iter().any(|r| r.len() != dim) {
                    return Err(SimError::InvalidCase(format!(
                        "covariance must be {dim} x {dim}"
                    )));
                }
                Matrix::from_rows(matrix).map_err(|e| SimError::InvalidCase(e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateCase {
    pub tag: CaseTag,
    pub p: usize,
    #[serde(default)]
    pub covariance: CovarianceSpec,
}

impl CovariateCase {
    pub fn new(tag: CaseTag, p: usize) -> Self {
        Self {
            tag,
            p,
            covariance: CovarianceSpec::default(),
        }
    }

    /// Dimension of the underlying Gaussian vector.
    pub fn base_dim(&self) -> usize {
        match self.tag {
            CaseTag::Interactions => INTERACTION_BASE,
            _ => self.p,
        }
    }

    pub fn generator(&self) -> Result<CovariateGenerator, SimError> {
        if self.p == 0 {
            return Err(SimError::InvalidCase("p must be positive".into()));
        }
        if self.tag == CaseTag::Interactions && self.p != INTERACTION_P {
            return Err(SimError::InvalidCase(format!(
                "the interactions case has p = {INTERACTION_P}"
            )));
        }
        let sigma = self.covariance.matrix(self.base_dim())?;
        let factor = spd_factorize(&sigma)
            .map_err(|_| SimError::InvalidCase("covariance is not positive definite".into()))?;
        let l = factor.lower();
        let d = self.base_dim();
        let mut lower = Vec::with_capacity(d * (d + 1) / 2);
        for i in 0..d {
            for j in 0..=i {
                lower.push(l[(i, j)]);
            }
        }
        Ok(CovariateGenerator {
            tag: self.tag,
            p: self.p,
            dim: d,
            lower,
            chi2: [1.0, 2.0, 3.0].map(|nu| ChiSquared::new(nu).expect("valid dof")),
        })
    }
}

/// A prepared sampler for one case.
#[derive(Debug, Clone)]
pub struct CovariateGenerator {
    tag: CaseTag,
    p: usize,
    dim: usize,
    /// Lower Cholesky factor of Σ, packed row by row.
    lower: Vec<f64>,
    chi2: [ChiSquared<f64>; 3],
}

impl CovariateGenerator {
    pub fn p(&self) -> usize {
        self.p
    }

    fn normal_into(&self, rng: &mut ChaCha8Rng, e: &mut [f64], out: &mut [f64]) {
        for v in e.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let mut at = 0;
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            let row = &self.lower[at..at + i + 1];
            *o = row.iter().zip(&e[..=i]).map(|(a, b)| a * b).sum();
            at += i + 1;
        }
    }

    fn t_into(&self, nu: usize, rng: &mut ChaCha8Rng, e: &mut [f64], out: &mut [f64]) {
        self.normal_into(rng, e, out);
        let w = loop {
            let w: f64 = self.chi2[nu - 1].sample(rng);
            if w > 0.0 {
                break w;
            }
        };
        let s = (w / nu as f64).sqrt().recip();
        out.iter_mut().for_each(|v| *v *= s);
    }

    /// Fills one row; returns the mixture component (0 for other cases).
    fn row(&self, rng: &mut ChaCha8Rng, e: &mut [f64], base: &mut [f64], out: &mut [f64]) -> u8 {
        match self.tag {
            CaseTag::Normal => self.normal_into(rng, e, out),
            CaseTag::Lognormal => {
                self.normal_into(rng, e, out);
                out.iter_mut().for_each(|v| *v = v.exp());
            }
            CaseTag::T2 => self.t_into(2, rng, e, out),
            CaseTag::T1 => self.t_into(1, rng, e, out),
            CaseTag::Mixture => {
                let c = ((rng.random::<f64>() * MIXTURE_COMPONENTS as f64) as usize)
                    .min(MIXTURE_COMPONENTS - 1);
                match c {
                    0 => self.normal_into(rng, e, out),
                    1 => self.t_into(2, rng, e, out),
                    2 => self.t_into(3, rng, e, out),
                    3 => out.iter_mut().for_each(|v| *v = 2.0 * rng.random::<f64>() - 1.0),
                    _ => self.normal_into(rng, e, out),
                }
                if c == MIXTURE_COMPONENTS - 1 {
                    out.iter_mut().for_each(|v| *v = v.exp());
                } else {
                    // the first four components are centred at 1
                    out.iter_mut().for_each(|v| *v += 1.0);
                }
                return c as u8;
            }
            CaseTag::Interactions => {
                self.normal_into(rng, e, base);
                let (v1, v2) = (base[0], base[1]);
                out[..20].copy_from_slice(base);
                for (o, b) in out[20..40].iter_mut().zip(base.iter()) {
                    *o = v1 * b;
                }
                for (o, b) in out[40..50].iter_mut().zip(&base[10..20]) {
                    *o = v2 * b;
                }
            }
        }
        0
    }

    fn block(&self, key: StreamKey, rows: usize, tags: bool) -> (Vec<f64>, Vec<u8>) {
        let mut rng = key.rng();
        let mut buf = vec![0.0; rows * self.p];
        let mut comps = Vec::with_capacity(if tags { rows } else { 0 });
        let mut e = vec![0.0; self.dim];
        let mut base = vec![0.0; self.dim];
        for r in 0..rows {
            let c = self.row(&mut rng, &mut e, &mut base, &mut buf[r * self.p..(r + 1) * self.p]);
            if tags {
                comps.push(c);
            }
        }
        (buf, comps)
    }

    /// `n` rows as a column-major matrix, plus mixture component labels when
    /// `tags` is set.
    pub fn generate(&self, n: usize, key: StreamKey, tags: bool) -> (Matrix, Vec<u8>) {
        let p = self.p;
        let mut data = vec![0.0; n * p];
        let mut comps = Vec::with_capacity(if tags { n } else { 0 });
        let blocks = n.div_ceil(BLOCK_ROWS);
        let mut b0 = 0;
        while b0 < blocks {
            let b1 = (b0 + BLOCKS_PER_GROUP).min(blocks);
            let parts: Vec<(Vec<f64>, Vec<u8>)> = (b0..b1)
                .into_par_iter()
                .map(|b| {
                    let rows = BLOCK_ROWS.min(n - b * BLOCK_ROWS);
                    self.block(key.child(b as u64), rows, tags)
                })
                .collect();
            for (offset, (buf, c)) in parts.into_iter().enumerate() {
                let start = (b0 + offset) * BLOCK_ROWS;
                let rows = buf.len() / p;
                for j in 0..p {
                    let col = &mut data[j * n + start..j * n + start + rows];
                    for (r, v) in col.iter_mut().enumerate() {
                        *v = buf[r * p + j];
                    }
                }
                comps.extend(c);
            }
            b0 = b1;
        }
        let m = Matrix::new(n, p, data).expect("generated values are finite");
        (m, comps)
    }
}

/// `n × p` covariates for `case`, drawn from the stream `key`.
pub fn gen_covariates(case: &CovariateCase, n: usize, key: StreamKey) -> Result<Matrix, SimError> {
    Ok(case.generator()?.generate(n, key, false).0)
}

/// As [`gen_covariates`], also returning each row's mixture component
/// (all zero outside the mixture case).
pub fn gen_covariates_tagged(
    case: &CovariateCase,
    n: usize,
    key: StreamKey,
) -> Result<(Matrix, Vec<u8>), SimError> {
    Ok(case.generator()?.generate(n, key, true))
}
