use super::ChannelMap;
use crate::error::{Error, Result};
use crate::numerics::{frobenius_norm, identity, kron, ComplexMatrix, Tolerances};

/// `T(X) = V* π(X) V` with `π(X) = X ⊗ I_r` and `V` an `n r × m` matrix
/// (an isometry when `T` is unital).
#[derive(Debug, Clone)]
pub struct StinespringDilation {
    input_dim: usize,
    multiplicity: usize,
    isometry: ComplexMatrix,
    residual: f64,
}

impl StinespringDilation {
    pub fn isometry(&self) -> &ComplexMatrix {
        &self.isometry
    }

    pub fn multiplicity(&self) -> usize {
        self.multiplicity
    }

    pub fn represent(&self, x: &ComplexMatrix) -> ComplexMatrix {
        kron(x, &identity(self.multiplicity))
    }

    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.isometry.adjoint() * self.represent(x) * &self.isometry
    }

    /// `‖V*V − I‖_F`.
    pub fn isometry_defect(&self) -> f64 {
        let m = self.isometry.ncols();
        frobenius_norm(&(self.isometry.adjoint() * &self.isometry - identity(m)))
    }

    /// Largest reconstruction error over the domain basis, measured when built.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }
}

/// Minimal dilation built from the Kraus operators of `T ∘ E`, stacking
/// `V[i r + k, a] = W_k[i, a]`.
pub fn stinespring_dilation(t: &ChannelMap, tol: &Tolerances) -> Result<StinespringDilation> {
    t.require_cp(tol)?;
    let kraus = t.kraus(tol)?;
    let (n, m, r) = (t.input_dim(), t.output_dim(), kraus.rank());
    let mut v = ComplexMatrix::zeros(n * r, m);
    for (k, w) in kraus.operators.iter().enumerate() {
        for i in 0..n {
            for a in 0..m {
                v[(i * r + k, a)] = w[(i, a)];
            }
        }
    }
    let mut dilation = StinespringDilation {
        input_dim: n,
        multiplicity: r,
        isometry: v,
        residual: 0.0,
    };
    dilation.residual = t
        .domain()
        .basis()
        .iter()
        .map(|b| frobenius_norm(&(dilation.apply(b) - t.apply(b))))
        .fold(0.0, f64::max);
    if dilation.residual > tol.eps_verify * (n as f64).sqrt() {
        return Err(Error::IllConditioned(format!(
            "Stinespring reconstruction residual {:.3e}",
            dilation.residual
        )));
    }
    Ok(dilation)
}
