//! The linear measurement model `x = H*theta + w` and its orthogonal
//! complement.
//!
//! A measurement matrix pairs the M x K Jacobian `H` with an M x (M-K) matrix
//! `B` whose columns form an orthonormal basis of the subspace orthogonal to
//! the columns of `H`. Residual-based detection only ever touches `H` through
//! that complement, so `B` is computed once at construction and reused.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest one count as zero when
/// deciding rank.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Maximum allowed magnitude in the complement checks `B^T H = 0` and
/// `B^T B = I`.
pub const COMPLEMENT_TOLERANCE: f64 = 1e-10;

/// A full-rank M x K Jacobian together with its orthonormal complement.
#[derive(Debug, Clone)]
pub struct MeasurementMatrix {
    h: DMatrix<f64>,
    b: DMatrix<f64>,
}

/// Split of an attack vector into its column-space and complement parts,
/// `a = H*theta_a + B*theta_b`.
#[derive(Debug, Clone)]
pub struct AttackDecomposition {
    pub theta_a: DVector<f64>,
    pub theta_b: DVector<f64>,
}

impl AttackDecomposition {
    /// True when the complement part is negligible, i.e. the attack is
    /// indistinguishable from a state change.
    pub fn is_unobservable(&self, tolerance: f64) -> bool {
        self.theta_b.amax() <= tolerance
    }
}

impl MeasurementMatrix {
    /// Wraps a Jacobian, computing the complement and checking rank and the
    /// orthogonality invariants.
    pub fn from_jacobian(h: DMatrix<f64>) -> Result<Self> {
        let (m, k) = h.shape();
        if m <= k {
            return Err(Error::Underdetermined { m, k });
        }
        let rank = numerical_rank(&h);
        if rank < k {
            return Err(Error::RankDeficient { rank, cols: k });
        }
        let b = orthogonal_complement(&h)?;
        let bth = b.transpose() * &h;
        if bth.amax() > COMPLEMENT_TOLERANCE {
            return Err(Error::Validation(format!(
                "complement check failed: max |B^T H| = {:e}",
                bth.amax()
            )));
        }
        let mut btb = b.transpose() * &b;
        for i in 0..btb.nrows() {
            btb[(i, i)] -= 1.0;
        }
        if btb.amax() > COMPLEMENT_TOLERANCE {
            return Err(Error::Validation(format!(
                "complement check failed: max |B^T B - I| = {:e}",
                btb.amax()
            )));
        }
        Ok(Self { h, b })
    }

    pub fn meters(&self) -> usize {
        self.h.nrows()
    }

    pub fn states(&self) -> usize {
        self.h.ncols()
    }

    /// Residual degrees of freedom, M - K.
    pub fn dof(&self) -> usize {
        self.meters() - self.states()
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn complement(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Dense residual projector `I - H (H^T H)^-1 H^T`. Quadratic in M; kept
    /// for cross-checking the complement form in tests.
    pub fn residual_projector(&self) -> DMatrix<f64> {
        let hth = self.h.transpose() * &self.h;
        let chol = nalgebra::Cholesky::new(hth).expect("full-rank H has SPD normal matrix");
        let pinv_ht = chol.solve(&self.h.transpose());
        DMatrix::identity(self.meters(), self.meters()) - &self.h * pinv_ht
    }

    /// Splits `a` into `H*theta_a + B*theta_b`.
    pub fn decompose_attack(&self, a: &DVector<f64>) -> Result<AttackDecomposition> {
        if a.len() != self.meters() {
            return Err(Error::Dimension(format!(
                "attack vector has length {}, expected M = {}",
                a.len(),
                self.meters()
            )));
        }
        let theta_a = solve_normal_equations(&self.h, a)?;
        let theta_b = self.b.transpose() * a;
        Ok(AttackDecomposition { theta_a, theta_b })
    }
}

/// Least-squares solve of `H x ~ rhs` through the normal equations with a
/// Cholesky factorization. Rank deficiency surfaces as a singular factor.
pub(crate) fn solve_normal_equations(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let hth = h.transpose() * h;
    let chol = nalgebra::Cholesky::new(hth).ok_or(Error::Singular("normal equations"))?;
    Ok(chol.solve(&(h.transpose() * rhs)))
}

fn numerical_rank(h: &DMatrix<f64>) -> usize {
    let sv = h.clone().singular_values();
    let largest = sv.max();
    if largest <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * largest).count()
}

/// Orthonormal basis of the subspace orthogonal to the columns of `h`,
/// returned as an M x (M-K) matrix.
///
/// Uses a full Householder QR of `h`: the trailing M-K columns of the
/// accumulated Q span the null space of `H^T` exactly (up to rounding).
pub fn orthogonal_complement(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, k) = h.shape();
    if m <= k {
        return Err(Error::Underdetermined { m, k });
    }
    let rank = numerical_rank(h);
    if rank < k {
        return Err(Error::RankDeficient { rank, cols: k });
    }
    let (q, _) = householder_qr(h);
    Ok(q.columns(k, m - k).into_owned())
}

/// Full QR factorization `a = Q R` with Q accumulated as a dense M x M
/// orthogonal matrix.
fn householder_qr(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, k) = a.shape();
    let mut r = a.clone();
    let mut q = DMatrix::<f64>::identity(m, m);
    for j in 0..k.min(m) {
        let mut v = DVector::<f64>::zeros(m - j);
        for i in j..m {
            v[i - j] = r[(i, j)];
        }
        let norm = v.norm();
        if norm == 0.0 {
            continue;
        }
        // Reflect onto -sign(v0) * norm * e1 to avoid cancellation.
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vtv = v.norm_squared();
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;
        // R[j.., j..] -= beta * v (v^T R[j.., j..])
        for col in j..k {
            let mut dot = 0.0;
            for i in j..m {
                dot += v[i - j] * r[(i, col)];
            }
            let scale = beta * dot;
            for i in j..m {
                r[(i, col)] -= scale * v[i - j];
            }
        }
        // Q[.., j..] -= beta * (Q[.., j..] v) v^T
        for row in 0..m {
            let mut dot = 0.0;
            for i in j..m {
                dot += q[(row, i)] * v[i - j];
            }
            let scale = beta * dot;
            for i in j..m {
                q[(row, i)] -= scale * v[i - j];
            }
        }
    }
    (q, r)
}

/// Parses a matrix file: a `<M> <K>` header line followed by M rows of K
/// numbers. Blank lines and `#` comments are ignored.
pub fn parse_matrix(text: &str) -> Result<MeasurementMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, strip_comment(l)))
        .filter(|(_, l)| !l.trim().is_empty());

    let (header_line, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, message: "empty matrix file".into() })?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(Error::Parse {
            line: header_line,
            message: format!("expected header `<M> <K>`, found `{}`", header.trim()),
        });
    }
    let m: usize = parse_field(dims[0], header_line, "M")?;
    let k: usize = parse_field(dims[1], header_line, "K")?;
    if m == 0 || k == 0 {
        return Err(Error::Parse {
            line: header_line,
            message: "dimensions must be positive".into(),
        });
    }

    let mut h = DMatrix::<f64>::zeros(m, k);
    let mut row = 0;
    for (line_no, line) in lines {
        if row >= m {
            return Err(Error::Parse {
                line: line_no,
                message: format!("more than {m} data rows"),
            });
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != k {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {k} columns, found {}", fields.len()),
            });
        }
        for (col, field) in fields.iter().enumerate() {
            h[(row, col)] = field.parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid number `{field}`"),
            })?;
        }
        row += 1;
    }
    if row < m {
        return Err(Error::Parse {
            line: 0,
            message: format!("expected {m} data rows, found {row}"),
        });
    }
    MeasurementMatrix::from_jacobian(h)
}

fn parse_field(field: &str, line: usize, name: &str) -> Result<usize> {
    field.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {name} `{field}`"),
    })
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(idx) => &line[..idx],
        None => line,
    }
}

/// Renders a Jacobian in the matrix-file format. Entries carry 17 significant
/// digits so a parse round-trips to the exact same bits.
pub fn format_matrix(h: &DMatrix<f64>) -> String {
    let (m, k) = h.shape();
    let mut out = String::with_capacity(m * k * 26);
    out.push_str(&format!("{m} {k}\n"));
    for i in 0..m {
        for j in 0..k {
            if j > 0 {
                out.push(' ');
            }
            out.push_str(&format!("{:.16e}", h[(i, j)]));
        }
        out.push('\n');
    }
    out
}

/// Seeded standard-normal Jacobian used for matrix-scale experiments where
/// only the dimensions and column space matter.
pub fn synthetic_jacobian(m: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    DMatrix::from_fn(m, k, |_, _| rng.sample(StandardNormal))
}
