//! Exact link solve between two independently factorized subsystems.
//!
//! Each subsystem exposes one port as a Thévenin equivalent: the open-port
//! voltage under its current internal injections, and the driving-point
//! impedance seen into the port. For a single link of impedance `z_link`
//! joining ports 1 and 2, superposition gives the exact link current
//!
//! ```text
//! i_link = (e_open_1 − e_open_2) / (z_1 + z_2 + z_link)
//! ```
//!
//! Re-solving each subsystem with `∓ i_link` injected at its port then
//! reproduces the monolithic solution to rounding error — no relaxation,
//! no iteration. This is what lets the split dynamic simulation track the
//! single-network reference step for step.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::Z_MIN;
use crate::sparse::Factorization;

/// One subsystem seen from its port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheveninEquivalent {
    /// Port voltage with the link open, under the subsystem's present
    /// internal injections.
    pub e_open: Complex64,
    /// Driving-point impedance looking into the port.
    pub z_thevenin: Complex64,
}

/// Extract the port equivalent from a factorized subsystem: one solve under
/// the present injections for the open voltage, one unit-injection solve
/// for the impedance.
pub fn thevenin_at_port(
    fact: &Factorization<Complex64>,
    injections: &[Complex64],
    port: usize,
) -> TheveninEquivalent {
    let open = fact.solve(injections);
    let mut unit = vec![Complex64::new(0.0, 0.0); injections.len()];
    unit[port] = Complex64::new(1.0, 0.0);
    let z_col = fact.solve(&unit);
    TheveninEquivalent {
        e_open: open[port],
        z_thevenin: z_col[port],
    }
}

/// Current flowing from subsystem 1 into subsystem 2 through the link.
pub fn mate_link_current(
    side1: &TheveninEquivalent,
    side2: &TheveninEquivalent,
    z_link: Complex64,
) -> Result<Complex64> {
    let z_total = side1.z_thevenin + side2.z_thevenin + z_link;
    if z_total.norm() < Z_MIN {
        return Err(Error::model(format!(
            "link loop impedance {z_total} is below the {Z_MIN:e} pu floor"
        )));
    }
    Ok((side1.e_open - side2.e_open) / z_total)
}

/// Port voltages consistent with the link current: `e_open − z·i` on the
/// sending side, `e_open + z·i` on the receiving side.
pub fn port_voltages(
    side1: &TheveninEquivalent,
    side2: &TheveninEquivalent,
    i_link: Complex64,
) -> (Complex64, Complex64) {
    (
        side1.e_open - side1.z_thevenin * i_link,
        side2.e_open + side2.z_thevenin * i_link,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletMatrix;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Two one-bus subsystems with explicit ground admittances: everything
    /// is checkable by hand.
    #[test]
    fn hand_checked_two_node_link() {
        // Side 1: source injects 1+0j A into y = 1 S  -> e_open = 1, z = 1.
        // Side 2: no injection into y = 2 S            -> e_open = 0, z = 0.5.
        let side1 = TheveninEquivalent {
            e_open: c(1.0, 0.0),
            z_thevenin: c(1.0, 0.0),
        };
        let side2 = TheveninEquivalent {
            e_open: c(0.0, 0.0),
            z_thevenin: c(0.5, 0.0),
        };
        let i = mate_link_current(&side1, &side2, c(0.5, 0.0)).unwrap();
        assert!((i - c(0.5, 0.0)).norm() < 1e-15);
        let (v1, v2) = port_voltages(&side1, &side2, i);
        assert!((v1 - c(0.5, 0.0)).norm() < 1e-15);
        assert!((v2 - c(0.25, 0.0)).norm() < 1e-15);
        // KVL across the link closes: v1 - v2 = z_link * i.
        assert!(((v1 - v2) - c(0.5, 0.0) * i).norm() < 1e-15);
    }

    #[test]
    fn zero_loop_impedance_is_rejected() {
        let side = TheveninEquivalent {
            e_open: c(1.0, 0.0),
            z_thevenin: c(0.0, 0.0),
        };
        assert!(mate_link_current(&side, &side, c(0.0, 0.0)).is_err());
    }

    /// Random subsystems, solved both monolithically (dense elimination on
    /// the combined network) and via the link equivalent; port voltages and
    /// link current must agree to 1e-10.
    #[test]
    fn random_splits_match_the_monolithic_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for case in 0..200 {
            let n1 = rng.gen_range(1..=5);
            let n2 = rng.gen_range(1..=5);
            let (y1, inj1) = random_grounded_subsystem(&mut rng, n1);
            let (y2, inj2) = random_grounded_subsystem(&mut rng, n2);
            let port1 = rng.gen_range(0..n1);
            let port2 = rng.gen_range(0..n2);
            let z_link = c(rng.gen_range(0.01..0.3), rng.gen_range(0.05..0.6));

            // Monolithic: block-diagonal Y plus the link stamp.
            let n = n1 + n2;
            let mut dense = vec![vec![c(0.0, 0.0); n]; n];
            for (r, row) in y1.iter().enumerate() {
                for (cidx, v) in row.iter().enumerate() {
                    dense[r][cidx] = *v;
                }
            }
            for (r, row) in y2.iter().enumerate() {
                for (cidx, v) in row.iter().enumerate() {
                    dense[n1 + r][n1 + cidx] = *v;
                }
            }
            let yl = 1.0 / z_link;
            dense[port1][port1] += yl;
            dense[n1 + port2][n1 + port2] += yl;
            dense[port1][n1 + port2] -= yl;
            dense[n1 + port2][port1] -= yl;
            let mut rhs: Vec<Complex64> = inj1.iter().chain(inj2.iter()).copied().collect();
            let v_mono = dense_solve(&mut dense, &mut rhs);

            // Split: factorize each side alone, exchange one equivalent.
            let fact1 = to_factorization(&y1);
            let fact2 = to_factorization(&y2);
            let th1 = thevenin_at_port(&fact1, &inj1, port1);
            let th2 = thevenin_at_port(&fact2, &inj2, port2);
            let i_link = mate_link_current(&th1, &th2, z_link).unwrap();
            let (v1, v2) = port_voltages(&th1, &th2, i_link);

            assert!(
                (v1 - v_mono[port1]).norm() < 1e-10,
                "case {case}: port 1 voltage {v1} vs {}",
                v_mono[port1]
            );
            assert!(
                (v2 - v_mono[n1 + port2]).norm() < 1e-10,
                "case {case}: port 2 voltage {v2} vs {}",
                v_mono[n1 + port2]
            );
            let i_mono = (v_mono[port1] - v_mono[n1 + port2]) / z_link;
            assert!(
                (i_link - i_mono).norm() < 1e-10,
                "case {case}: link current {i_link} vs {i_mono}"
            );

            // Full interior agreement after injecting the link current.
            let mut with_link1 = inj1.clone();
            with_link1[port1] -= i_link;
            let v_side1 = fact1.solve(&with_link1);
            for k in 0..n1 {
                assert!((v_side1[k] - v_mono[k]).norm() < 1e-10, "case {case} bus {k}");
            }
            let mut with_link2 = inj2.clone();
            with_link2[port2] += i_link;
            let v_side2 = fact2.solve(&with_link2);
            for k in 0..n2 {
                assert!(
                    (v_side2[k] - v_mono[n1 + k]).norm() < 1e-10,
                    "case {case} bus {}",
                    n1 + k
                );
            }
        }
    }

    /// Connected ladder network with shunts to ground on every node, so the
    /// matrix is well conditioned and nonsingular.
    fn random_grounded_subsystem(
        rng: &mut ChaCha8Rng,
        n: usize,
    ) -> (Vec<Vec<Complex64>>, Vec<Complex64>) {
        let mut y = vec![vec![c(0.0, 0.0); n]; n];
        for k in 0..n {
            // Shunt keeps the diagonal dominant.
            y[k][k] += c(rng.gen_range(0.5..2.0), rng.gen_range(-0.5..0.5));
        }
        for k in 1..n {
            let j = rng.gen_range(0..k);
            let series = 1.0 / c(rng.gen_range(0.02..0.2), rng.gen_range(0.05..0.5));
            y[k][k] += series;
            y[j][j] += series;
            y[k][j] -= series;
            y[j][k] -= series;
        }
        let inj = (0..n)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        (y, inj)
    }

    fn to_factorization(dense: &[Vec<Complex64>]) -> Factorization<Complex64> {
        let n = dense.len();
        let mut triplets = TripletMatrix::new(n);
        for (r, row) in dense.iter().enumerate() {
            for (cidx, v) in row.iter().enumerate() {
                if v.norm() > 0.0 {
                    triplets.add(r, cidx, *v);
                }
            }
        }
        triplets.to_csc().factorize().unwrap()
    }

    fn dense_solve(a: &mut [Vec<Complex64>], b: &mut [Complex64]) -> Vec<Complex64> {
        let n = b.len();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|x, y| a[*x][col].norm().total_cmp(&a[*y][col].norm()))
                .unwrap();
            a.swap(col, pivot);
            b.swap(col, pivot);
            for row in col + 1..n {
                let factor = a[row][col] / a[col][col];
                for k in col..n {
                    let upper = a[col][k];
                    a[row][k] -= factor * upper;
                }
                let rhs = b[col];
                b[row] -= factor * rhs;
            }
        }
        let mut x = vec![c(0.0, 0.0); n];
        for row in (0..n).rev() {
            let mut acc = b[row];
            for k in row + 1..n {
                acc -= a[row][k] * x[k];
            }
            x[row] = acc / a[row][row];
        }
        x
    }
}
