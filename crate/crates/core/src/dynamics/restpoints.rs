use super::{drift_unchecked, RateKernel};
use crate::error::Error;
use crate::linalg::solve;
use crate::scalar::Scalar;
use crate::simplex::SimplexVector;

const MAX_ITERS: usize = 500;
const DEDUP_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct RestPointReport<T> {
    /// Distinct rest points, in order of first discovery.
    pub points: Vec<SimplexVector<T>>,
    /// Seeds whose local search did not reach the tolerance.
    pub failures: Vec<Error>,
}

fn residual<T: Scalar, K: RateKernel<T> + ?Sized>(kernel: &K, m: &[T]) -> Vec<T> {
    let rates = kernel.rates(&SimplexVector::unchecked(m.to_vec()));
    drift_unchecked(&rates, m)
}

fn sup_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
}

fn sq_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum()
}

/// Point of the simplex from tangent coordinates (all but the last mass).
fn embed<T: Scalar>(s: &[T]) -> Vec<T> {
    let mut m = s.to_vec();
    m.push(T::one() - s.iter().copied().sum::<T>());
    m
}

fn project<T: Scalar>(m: &[T]) -> Vec<T> {
    let clipped: Vec<T> = m.iter().map(|&v| v.max(T::zero())).collect();
    let s: T = clipped.iter().copied().sum();
    clipped.into_iter().map(|v| v / s).collect()
}

/// Multistart Levenberg–Marquardt descent on `‖ṁ‖²` in tangent coordinates,
/// projecting every iterate back onto the simplex.
pub fn find_rest_points<T: Scalar, K: RateKernel<T> + ?Sized>(
    kernel: &K,
    seeds: &[SimplexVector<T>],
    tol: T,
) -> RestPointReport<T> {
    let mut points: Vec<SimplexVector<T>> = Vec::new();
    let mut failures = Vec::new();
    for (i, seed) in seeds.iter().enumerate() {
        match descend(kernel, seed.as_slice(), tol) {
            Ok(p) => {
                let p = SimplexVector::project(&p).expect("projected iterate");
                let dup = points.iter().any(|q| {
                    q.as_slice()
                        .iter()
                        .zip(p.as_slice())
                        .all(|(&a, &b)| (a - b).abs() <= T::lit(DEDUP_DISTANCE))
                });
                if !dup {
                    points.push(p);
                }
            }
            Err(residual) => failures.push(Error::NoConvergence {
                seed: i,
                residual: residual.to_f64_lossy(),
            }),
        }
    }
    RestPointReport { points, failures }
}

fn descend<T: Scalar, K: RateKernel<T> + ?Sized>(
    kernel: &K,
    seed: &[T],
    tol: T,
) -> Result<Vec<T>, T> {
    let n = seed.len();
    let mut m = seed.to_vec();
    let mut f = residual(kernel, &m);
    if n == 1 || sup_norm(&f) <= tol {
        return Ok(m);
    }
    let d = n - 1;
    let fd_step = T::epsilon().sqrt() * T::lit(4.0);
    let mut damping = T::lit(1e-3);

    for _ in 0..MAX_ITERS {
        if sup_norm(&f) <= tol {
            return Ok(m);
        }
        let s: Vec<T> = m[..d].to_vec();
        // Jacobian of the first d drift components w.r.t. tangent coordinates.
        let mut jac = vec![vec![T::zero(); d]; d];
        for j in 0..d {
            let mut sp = s.clone();
            let mut sm = s.clone();
            sp[j] += fd_step;
            sm[j] -= fd_step;
            let fp = residual(kernel, &embed(&sp));
            let fm = residual(kernel, &embed(&sm));
            for i in 0..d {
                jac[i][j] = (fp[i] - fm[i]) / (fd_step + fd_step);
            }
        }
        let g: Vec<T> = f[..d].to_vec();
        let current = sq_norm(&f);
        let mut improved = false;
        for _ in 0..30 {
            let mut normal = vec![vec![T::zero(); d]; d];
            let mut rhs = vec![T::zero(); d];
            for a in 0..d {
                for b in 0..d {
                    normal[a][b] = (0..d).map(|i| jac[i][a] * jac[i][b]).sum();
                }
                rhs[a] = -(0..d).map(|i| jac[i][a] * g[i]).sum::<T>();
            }
            for (a, row) in normal.iter_mut().enumerate() {
                let diag = row[a];
                row[a] = diag + damping * (T::one() + diag);
            }
            let Some(delta) = solve(normal, rhs) else {
                damping *= T::lit(10.0);
                continue;
            };
            let trial_s: Vec<T> = s.iter().zip(&delta).map(|(&a, &b)| a + b).collect();
            let trial = project(&embed(&trial_s));
            let ft = residual(kernel, &trial);
            if sq_norm(&ft) < current {
                m = trial;
                f = ft;
                damping = (damping * T::lit(0.3)).max(T::lit(1e-12));
                improved = true;
                break;
            }
            damping *= T::lit(10.0);
        }
        if !improved {
            break;
        }
    }
    if sup_norm(&f) <= tol {
        Ok(m)
    } else {
        Err(sup_norm(&f))
    }
}
