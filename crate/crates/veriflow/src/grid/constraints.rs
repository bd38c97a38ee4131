use crate::error::{Error, Result};
use crate::grid::network::GridNetwork;
use crate::grid::variables::SystemVariableSpace;
use crate::linalg::CsrMatrix;
use crate::scalar::Scalar;

/// Which physical relation a constraint row encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquationFamily {
    /// Real power balance at the branch's receiving bus.
    RealBalance,
    /// Reactive power balance at the branch's receiving bus.
    ReactiveBalance,
    /// Squared-voltage drop along the branch.
    VoltageDrop,
    /// Ties the relaxation auxiliary to the sending-end squared voltage.
    AuxTie,
}

/// Provenance of one constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowTag {
    pub family: EquationFamily,
    /// Canonical branch array index the row belongs to.
    pub branch: usize,
}

/// Sparse linear constraint system H x = 0 over the global variable space,
/// four rows per branch in canonical branch order.
#[derive(Debug, Clone)]
pub struct ConstraintMatrix<T> {
    matrix: CsrMatrix<T>,
    tags: Vec<RowTag>,
}

pub fn assemble_constraints<T: Scalar>(
    net: &GridNetwork<T>,
    space: &SystemVariableSpace,
) -> Result<ConstraintMatrix<T>> {
    if space.bus_count() != net.bus_count() || space.branch_count() != net.branch_count() {
        return Err(Error::Dimension {
            context: "variable space vs network",
            expected: 3 * net.bus_count() + 4 * net.branch_count(),
            got: space.dimension(),
        });
    }
    let two = T::from_f64(2.0);
    let mut triplets: Vec<(usize, usize, T)> = Vec::new();
    let mut tags = Vec::with_capacity(4 * net.branch_count());
    for (l, br) in net.branches().iter().enumerate() {
        let base = 4 * l;
        let (f, t) = (br.from_bus, br.to_bus);
        let (r, x) = (br.resistance, br.reactance);

        triplets.push((base, space.injection_p(t), T::one()));
        triplets.push((base, space.flow_p(l), -T::one()));
        triplets.push((base, space.current_sq(l), r));
        for &c in net.child_branches(t) {
            triplets.push((base, space.flow_p(c), T::one()));
        }
        tags.push(RowTag {
            family: EquationFamily::RealBalance,
            branch: l,
        });

        triplets.push((base + 1, space.injection_q(t), T::one()));
        triplets.push((base + 1, space.flow_q(l), -T::one()));
        triplets.push((base + 1, space.current_sq(l), x));
        for &c in net.child_branches(t) {
            triplets.push((base + 1, space.flow_q(c), T::one()));
        }
        tags.push(RowTag {
            family: EquationFamily::ReactiveBalance,
            branch: l,
        });

        triplets.push((base + 2, space.voltage_sq(t), T::one()));
        triplets.push((base + 2, space.voltage_sq(f), -T::one()));
        triplets.push((base + 2, space.flow_p(l), two * r));
        triplets.push((base + 2, space.flow_q(l), two * x));
        triplets.push((base + 2, space.current_sq(l), -(r * r + x * x)));
        tags.push(RowTag {
            family: EquationFamily::VoltageDrop,
            branch: l,
        });

        triplets.push((base + 3, space.voltage_sq(f), T::one()));
        triplets.push((base + 3, space.aux(l), -T::one()));
        tags.push(RowTag {
            family: EquationFamily::AuxTie,
            branch: l,
        });
    }
    let matrix = CsrMatrix::from_triplets(4 * net.branch_count(), space.dimension(), &triplets);
    Ok(ConstraintMatrix { matrix, tags })
}

impl<T: Scalar> ConstraintMatrix<T> {
    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.matrix
    }

    pub fn tags(&self) -> &[RowTag] {
        &self.tags
    }

    /// Residuals H x for a full-length system vector.
    pub fn evaluate_residual(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.cols() {
            return Err(Error::Dimension {
                context: "residual input vector",
                expected: self.cols(),
                got: x.len(),
            });
        }
        Ok(self.matrix.mul_vec(x))
    }

    /// Largest absolute residual entry.
    pub fn max_abs_residual(&self, x: &[T]) -> Result<T> {
        let r = self.evaluate_residual(x)?;
        Ok(r.iter().fold(T::zero(), |m, v| m.max(v.abs())))
    }
}
