//! Uniform axial grid on the extended duct `[L0, L2]`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AxialGrid {
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
    /// Number of intervals on `[L0, L2]`.
    pub n: usize,
    pub h: f64,
    pub x: Vec<f64>,
    /// Node index of `L1` (end of the physical duct).
    pub i1: usize,
    /// Node index of the background sonic point `x1 = 0`.
    pub i0: usize,
}

fn exact_index(x: f64, l0: f64, h: f64) -> Option<usize> {
    let t = (x - l0) / h;
    let r = t.round();
    ((t - r).abs() < 1e-9 && r >= 0.0).then_some(r as usize)
}

impl AxialGrid {
    /// Grid on `[L0, 2 L1]` with `n` intervals. `L1` and `0` must fall on nodes.
    pub fn new(l0: f64, l1: f64, n: usize) -> Result<Self> {
        if !(l0 < 0.0 && l1 > 0.0) {
            return Err(Error::InvalidGeometry(format!("need L0 < 0 < L1, got L0 = {l0}, L1 = {l1}")));
        }
        if n < 16 {
            return Err(Error::GridIncompatible(format!("too few axial intervals: {n}")));
        }
        let l2 = 2.0 * l1;
        let h = (l2 - l0) / n as f64;
        let i1 = exact_index(l1, l0, h)
            .ok_or_else(|| Error::GridIncompatible(format!("L1 = {l1} is not a grid node for {n} intervals")))?;
        let i0 = exact_index(0.0, l0, h)
            .ok_or_else(|| Error::GridIncompatible(format!("x1 = 0 is not a grid node for {n} intervals")))?;
        let x = (0..=n).map(|i| if i == i0 { 0.0 } else if i == i1 { l1 } else { l0 + i as f64 * h }).collect();
        Ok(AxialGrid { l0, l1, l2, n, h, x, i1, i0 })
    }

    pub fn nodes(&self) -> usize {
        self.n + 1
    }

    /// Nodes of the physical duct `[L0, L1]`.
    pub fn omega_nodes(&self) -> usize {
        self.i1 + 1
    }

    pub fn omega_x(&self) -> &[f64] {
        &self.x[..=self.i1]
    }

    /// Trapezoid weight of node `i` over `[L0, L1]`.
    pub fn omega_weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.i1 {
            0.5 * self.h
        } else if i < self.i1 {
            self.h
        } else {
            0.0
        }
    }

    /// Require the interval count used by the reflection operator.
    pub fn check_extension_divisibility(&self) -> Result<()> {
        if !self.n.is_multiple_of(840) {
            return Err(Error::GridIncompatible(format!("axial intervals {} not divisible by 840", self.n)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_grid_nodes() {
        let g = AxialGrid::new(-1.0, 0.5, 840).unwrap();
        assert_eq!(g.i1, 630);
        assert_eq!(g.i0, 420);
        assert_eq!(g.x[g.i0], 0.0);
        assert_eq!(g.x[g.n], 1.0);
        let w: f64 = (0..g.nodes()).map(|i| g.omega_weight(i)).sum();
        assert!((w - 1.5).abs() < 1e-12);
        assert!(g.check_extension_divisibility().is_ok());
    }

    #[test]
    fn misaligned_l1_rejected() {
        assert!(matches!(AxialGrid::new(-1.0, 0.5, 842), Err(Error::GridIncompatible(_))));
    }
}
