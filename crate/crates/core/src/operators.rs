//! Down, up and combined Helmholtzians, their symmetrization, and the
//! random-walk graph Laplacian.
//!
//! With `W` the floored diagonal weights:
//!
//! * down = `B1ᵀ W0⁻¹ B1 W1`
//! * up = `W1⁻¹ B2 W2 B2ᵀ`
//! * `L1 = a·down + b·up`, `L1s = W1^{1/2} L1 W1^{-1/2}`
//! * `L0 = W0⁻¹ B1 W1 B1ᵀ`

use crate::complex::BoundaryMatrix;
use crate::error::{invalid, Error, Result};
use crate::linalg::{LinearOperator, Scaled};
use crate::sparse::CscMatrix;
use crate::weights::{Floored, WeightSet};

pub const DEFAULT_A: f64 = 0.25;
pub const DEFAULT_B: f64 = 1.0;
/// Above this many edges operators are applied by composition instead of
/// being assembled.
pub const DEFAULT_EXPLICIT_MAX_EDGES: usize = 20_000;

fn check_positive(w: &[f64], what: &str) -> Result<()> {
    match w.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        Some(i) => Err(Error::Internal(format!(
            "{what} weight {i} is {} after flooring",
            w[i]
        ))),
        None => Ok(()),
    }
}

fn recip(w: &[f64]) -> Vec<f64> {
    w.iter().map(|v| 1.0 / v).collect()
}

/// `B1ᵀ W0⁻¹ B1 W1`.
pub fn assemble_down(b1: &BoundaryMatrix, w0: &[f64], w1: &[f64]) -> Result<CscMatrix> {
    check_positive(w0, "vertex")?;
    let mut inner = b1.matrix().clone();
    inner.scale_rows(&recip(w0));
    inner.scale_cols(w1);
    Ok(b1.matrix().transpose().matmul(&inner))
}

/// `W1⁻¹ B2 W2 B2ᵀ`.
pub fn assemble_up(b2: &BoundaryMatrix, w1: &[f64], w2: &[f64]) -> Result<CscMatrix> {
    check_positive(w1, "edge")?;
    let mut up = b2.matrix().clone();
    up.scale_cols(w2);
    let mut up = up.matmul(&b2.matrix().transpose());
    up.scale_rows(&recip(w1));
    Ok(up)
}

/// `a·down + b·up`.
pub fn assemble_helmholtzian(
    down: &CscMatrix,
    up: &CscMatrix,
    a: f64,
    b: f64,
) -> Result<CscMatrix> {
    check_coefficients(a, b)?;
    Ok(down.lincomb(a, up, b))
}

fn check_coefficients(a: f64, b: f64) -> Result<()> {
    if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
        return Err(invalid(format!(
            "coefficients must be nonnegative, got a={a}, b={b}"
        )));
    }
    if a == 0.0 && b == 0.0 {
        return Err(invalid("coefficients a and b are both zero"));
    }
    Ok(())
}

/// `(M + Mᵀ)/2` with `M = W1^{1/2} L W1^{-1/2}`.
pub fn symmetrize(l1: &CscMatrix, w1: &[f64]) -> Result<CscMatrix> {
    check_positive(w1, "edge")?;
    let sqrt: Vec<f64> = w1.iter().map(|v| v.sqrt()).collect();
    let mut m = l1.clone();
    m.scale_rows(&sqrt);
    m.scale_cols(&recip(&sqrt));
    Ok(m.symmetrized())
}

/// `W0⁻¹ B1 W1 B1ᵀ`.
pub fn assemble_graph_laplacian(b1: &BoundaryMatrix, w0: &[f64], w1: &[f64]) -> Result<CscMatrix> {
    check_positive(w0, "vertex")?;
    let mut m = b1.matrix().clone();
    m.scale_cols(w1);
    let mut l0 = m.matmul(&b1.matrix().transpose());
    l0.scale_rows(&recip(w0));
    Ok(l0)
}

/// Which operator a [`OperatorView`] applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Down,
    Up,
    L1,
    /// `W1^{1/2} down W1^{-1/2}`, symmetric.
    DownSym,
    /// `W1^{1/2} up W1^{-1/2}`, symmetric.
    UpSym,
    L1Sym,
    L0,
}

#[derive(Debug, Clone)]
struct Explicit {
    down: CscMatrix,
    up: CscMatrix,
    l1: CscMatrix,
    down_sym: CscMatrix,
    up_sym: CscMatrix,
    l1_sym: CscMatrix,
    l0: CscMatrix,
}

/// All first-order operators of a weighted 2-complex.
#[derive(Debug, Clone)]
pub struct HelmholtzOperators {
    pub a: f64,
    pub b: f64,
    b1: CscMatrix,
    b2: CscMatrix,
    w0: Floored,
    w1: Floored,
    w2: Vec<f64>,
    w1_sqrt: Vec<f64>,
    explicit: Option<Explicit>,
}

impl HelmholtzOperators {
    /// Assemble explicitly when the complex has at most `explicit_max_edges`
    /// edges, otherwise keep only the factors.
    pub fn new(
        b1: &BoundaryMatrix,
        b2: &BoundaryMatrix,
        weights: &WeightSet,
        a: f64,
        b: f64,
        explicit_max_edges: usize,
    ) -> Result<Self> {
        check_coefficients(a, b)?;
        if !weights.w1.iter().any(|&v| v > 0.0) {
            return Err(invalid(
                "every edge weight is zero; the complex has no weighted triangle (increase delta or epsilon)",
            ));
        }
        let (w0, w1) = weights.floored();
        check_positive(&w0.values, "vertex")?;
        check_positive(&w1.values, "edge")?;
        let w1_sqrt: Vec<f64> = w1.values.iter().map(|v| v.sqrt()).collect();
        let mut ops = Self {
            a,
            b,
            b1: b1.matrix().clone(),
            b2: b2.matrix().clone(),
            w0,
            w1,
            w2: weights.w2.clone(),
            w1_sqrt,
            explicit: None,
        };
        if b1.shape().1 <= explicit_max_edges {
            let down = assemble_down(b1, &ops.w0.values, &ops.w1.values)?;
            let up = assemble_up(b2, &ops.w1.values, &ops.w2)?;
            let l1 = assemble_helmholtzian(&down, &up, a, b)?;
            let down_sym = symmetrize(&down, &ops.w1.values)?;
            let up_sym = symmetrize(&up, &ops.w1.values)?;
            let l1_sym = down_sym.lincomb(a, &up_sym, b);
            let l0 = assemble_graph_laplacian(b1, &ops.w0.values, &ops.w1.values)?;
            ops.explicit = Some(Explicit {
                down,
                up,
                l1,
                down_sym,
                up_sym,
                l1_sym,
                l0,
            });
        }
        Ok(ops)
    }

    pub fn n_edges(&self) -> usize {
        self.b1.ncols()
    }

    pub fn n_vertices(&self) -> usize {
        self.b1.nrows()
    }

    pub fn is_explicit(&self) -> bool {
        self.explicit.is_some()
    }

    pub fn b1(&self) -> &CscMatrix {
        &self.b1
    }

    pub fn b2(&self) -> &CscMatrix {
        &self.b2
    }

    /// Floored vertex weights and the clamped vertices.
    pub fn w0(&self) -> &Floored {
        &self.w0
    }

    /// Floored edge weights and the clamped edges.
    pub fn w1(&self) -> &Floored {
        &self.w1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    pub fn w1_sqrt(&self) -> &[f64] {
        &self.w1_sqrt
    }

    /// Assembled matrix for `part`, if the operators are explicit.
    pub fn matrix(&self, part: Part) -> Option<&CscMatrix> {
        let e = self.explicit.as_ref()?;
        Some(match part {
            Part::Down => &e.down,
            Part::Up => &e.up,
            Part::L1 => &e.l1,
            Part::DownSym => &e.down_sym,
            Part::UpSym => &e.up_sym,
            Part::L1Sym => &e.l1_sym,
            Part::L0 => &e.l0,
        })
    }

    /// Assemble `part` regardless of the size threshold.
    pub fn assemble(&self, part: Part) -> Result<CscMatrix> {
        if let Some(m) = self.matrix(part) {
            return Ok(m.clone());
        }
        let b1 = BoundaryMatrix::from_matrix(1, self.b1.clone());
        let b2 = BoundaryMatrix::from_matrix(2, self.b2.clone());
        let (w0, w1) = (&self.w0.values, &self.w1.values);
        Ok(match part {
            Part::Down => assemble_down(&b1, w0, w1)?,
            Part::Up => assemble_up(&b2, w1, &self.w2)?,
            Part::L1 => assemble_helmholtzian(
                &assemble_down(&b1, w0, w1)?,
                &assemble_up(&b2, w1, &self.w2)?,
                self.a,
                self.b,
            )?,
            Part::DownSym => symmetrize(&assemble_down(&b1, w0, w1)?, w1)?,
            Part::UpSym => symmetrize(&assemble_up(&b2, w1, &self.w2)?, w1)?,
            Part::L1Sym => {
                let d = symmetrize(&assemble_down(&b1, w0, w1)?, w1)?;
                let u = symmetrize(&assemble_up(&b2, w1, &self.w2)?, w1)?;
                d.lincomb(self.a, &u, self.b)
            }
            Part::L0 => assemble_graph_laplacian(&b1, w0, w1)?,
        })
    }

    pub fn view(&self, part: Part) -> OperatorView<'_> {
        OperatorView { ops: self, part }
    }

    /// `(b·UpSym, a·DownSym)`; the two terms sum to `L1Sym`.
    pub fn scaled_halves(&self) -> (Scaled<OperatorView<'_>>, Scaled<OperatorView<'_>>) {
        (
            Scaled {
                factor: self.b,
                inner: self.view(Part::UpSym),
            },
            Scaled {
                factor: self.a,
                inner: self.view(Part::DownSym),
            },
        )
    }

    /// Largest possible eigenvalue of `L1`, `max(2a, 3b)`.
    pub fn spectrum_bound(&self) -> f64 {
        (2.0 * self.a).max(3.0 * self.b)
    }

    // Composite matvecs, used when nothing is assembled.

    fn down_apply(&self, x: &[f64], y: &mut [f64]) {
        let scaled: Vec<f64> = x.iter().zip(&self.w1.values).map(|(a, w)| a * w).collect();
        self.down_core(&scaled, y);
    }

    /// `B1ᵀ W0⁻¹ B1 x`
    fn down_core(&self, x: &[f64], y: &mut [f64]) {
        let mut v = self.b1.mul_vec(x);
        v.iter_mut().zip(&self.w0.values).for_each(|(a, w)| *a /= w);
        self.b1.tr_mul_vec_into(&v, y);
    }

    /// `B2 W2 B2ᵀ x`
    fn up_core(&self, x: &[f64], y: &mut [f64]) {
        let mut v = self.b2.tr_mul_vec(x);
        v.iter_mut().zip(&self.w2).for_each(|(a, w)| *a *= w);
        self.b2.mul_vec_into(&v, y);
    }

    fn up_apply(&self, x: &[f64], y: &mut [f64]) {
        self.up_core(x, y);
        y.iter_mut().zip(&self.w1.values).for_each(|(a, w)| *a /= w);
    }

    fn down_sym_apply(&self, x: &[f64], y: &mut [f64]) {
        let scaled: Vec<f64> = x.iter().zip(&self.w1_sqrt).map(|(a, s)| a * s).collect();
        self.down_core(&scaled, y);
        y.iter_mut().zip(&self.w1_sqrt).for_each(|(a, s)| *a *= s);
    }

    fn up_sym_apply(&self, x: &[f64], y: &mut [f64]) {
        let scaled: Vec<f64> = x.iter().zip(&self.w1_sqrt).map(|(a, s)| a / s).collect();
        self.up_core(&scaled, y);
        y.iter_mut().zip(&self.w1_sqrt).for_each(|(a, s)| *a /= s);
    }

    fn combine(
        &self,
        x: &[f64],
        y: &mut [f64],
        down: fn(&Self, &[f64], &mut [f64]),
        up: fn(&Self, &[f64], &mut [f64]),
    ) {
        let mut tmp = vec![0.0; y.len()];
        down(self, x, y);
        up(self, x, &mut tmp);
        y.iter_mut()
            .zip(&tmp)
            .for_each(|(d, u)| *d = self.a * *d + self.b * u);
    }
}

/// A borrowed operator that uses the assembled matrix when present and the
/// factored composition otherwise. Both paths compute the same map.
#[derive(Clone, Copy)]
pub struct OperatorView<'a> {
    ops: &'a HelmholtzOperators,
    part: Part,
}

impl OperatorView<'_> {
    /// Evaluate through the factors even if a matrix is assembled.
    pub fn apply_composite(&self, x: &[f64], y: &mut [f64]) {
        let o = self.ops;
        match self.part {
            Part::Down => o.down_apply(x, y),
            Part::Up => o.up_apply(x, y),
            Part::L1 => o.combine(
                x,
                y,
                HelmholtzOperators::down_apply,
                HelmholtzOperators::up_apply,
            ),
            Part::DownSym => o.down_sym_apply(x, y),
            Part::UpSym => o.up_sym_apply(x, y),
            Part::L1Sym => o.combine(
                x,
                y,
                HelmholtzOperators::down_sym_apply,
                HelmholtzOperators::up_sym_apply,
            ),
            Part::L0 => {
                let mut v = o.b1.tr_mul_vec(x);
                v.iter_mut().zip(&o.w1.values).for_each(|(a, w)| *a *= w);
                o.b1.mul_vec_into(&v, y);
                y.iter_mut().zip(&o.w0.values).for_each(|(a, w)| *a /= w);
            }
        }
    }
}

impl LinearOperator for OperatorView<'_> {
    fn dim(&self) -> usize {
        match self.part {
            Part::L0 => self.ops.n_vertices(),
            _ => self.ops.n_edges(),
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        match self.ops.matrix(self.part) {
            Some(m) => m.mul_vec_into(x, y),
            None => self.apply_composite(x, y),
        }
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        self.ops.matrix(self.part).map(CscMatrix::diag)
    }

    fn to_matrix(&self) -> Option<CscMatrix> {
        self.ops.matrix(self.part).cloned()
    }
}
