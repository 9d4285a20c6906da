use crate::error::{Error, Result};

/// Smallest node count accepted by [`build_grid`].
pub const MIN_NODES: usize = 8;

/// Uniform grid of interior nodes on the symmetric interval `(-L, L)`.
///
/// Node `i` (zero based) sits at `-L + (i + 1) h` with `h = 2L / (n + 1)`;
/// the two endpoints are not stored and carry the exterior zero datum.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    half_width: f64,
    h: f64,
    nodes: Vec<f64>,
}

impl Grid {
    /// Builds the partition without the resolution floor of [`build_grid`].
    pub fn uniform(half_width: f64, n: usize) -> Result<Self> {
        if !half_width.is_finite() || half_width <= 0.0 {
            return Err(Error::invalid(format!(
                "half width must be finite and positive, got {half_width}"
            )));
        }
        if n == 0 {
            return Err(Error::invalid("grid needs at least one interior node"));
        }
        let h = 2.0 * half_width / (n as f64 + 1.0);
        // mirror the left half so the node set is exactly symmetric
        let mut nodes = vec![0.0; n];
        for i in 0..n {
            let k = (i + 1) as f64;
            nodes[i] = if 2 * (i + 1) <= n + 1 {
                -half_width + k * h
            } else {
                half_width - (n - i) as f64 * h
            };
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Grid {
            half_width,
            h,
            nodes,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Distance of node `i` to the boundary, `L - |x_i|`.
    pub fn distance(&self, i: usize) -> f64 {
        // count cells instead of subtracting coordinates to avoid cancellation
        let n = self.len();
        let cells = (i + 1).min(n - i);
        cells as f64 * self.h
    }

    /// Grid with twice as many cells on the same interval.
    pub fn refined(&self) -> Result<Self> {
        Grid::uniform(self.half_width, 2 * self.len() + 1)
    }
}

/// Uniform grid with the resolution floor needed by the exponent fits.
pub fn build_grid(half_width: f64, n: usize) -> Result<Grid> {
    if n < MIN_NODES {
        return Err(Error::invalid(format!(
            "grid with {n} interior nodes is too coarse (need at least {MIN_NODES})"
        )));
    }
    Grid::uniform(half_width, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_nodes_on_unit_interval() {
        let g = Grid::uniform(1.0, 3).unwrap();
        assert_eq!(g.nodes(), &[-0.5, 0.0, 0.5]);
        assert_eq!(g.spacing(), 0.5);
    }

    #[test]
    fn spacing_for_511_nodes() {
        let g = build_grid(1.0, 511).unwrap();
        assert_eq!(g.spacing(), 2.0 / 512.0);
        assert!((g.spacing() * 512.0 - 2.0).abs() < 1e-15);
    }

    #[test]
    fn seven_nodes_half_width_two() {
        let g = Grid::uniform(2.0, 7).unwrap();
        let x = g.nodes();
        assert_eq!(x[0], -1.5);
        assert_eq!(x[6], 1.5);
        for i in 0..7 {
            assert_eq!(x[i], -x[6 - i]);
        }
    }

    #[test]
    fn rejects_coarse_and_non_finite() {
        assert!(build_grid(1.0, 7).is_err());
        assert!(build_grid(f64::NAN, 64).is_err());
        assert!(build_grid(f64::INFINITY, 64).is_err());
        assert!(build_grid(-1.0, 64).is_err());
        assert!(build_grid(1.0, 8).is_ok());
    }

    #[test]
    fn nodes_increasing_symmetric_inside() {
        for n in [8usize, 9, 64, 255, 1024] {
            let g = build_grid(1.3, n).unwrap();
            let x = g.nodes();
            for w in x.windows(2) {
                assert!(w[1] > w[0]);
            }
            for i in 0..n {
                assert_eq!(x[i], -x[n - 1 - i]);
                assert!(x[i].abs() < 1.3);
                assert!((g.distance(i) - (1.3 - x[i].abs())).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn refinement_halves_spacing() {
        let g = build_grid(1.0, 255).unwrap();
        let r = g.refined().unwrap();
        assert_eq!(r.len(), 511);
        assert!((r.spacing() - g.spacing() / 2.0).abs() < 1e-16);
    }
}
