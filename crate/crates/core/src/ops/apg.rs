use nalgebra::DMatrix;

/// A composite objective `F = f + h` with smooth `f` and prox-friendly `h`.
pub trait Composite {
    /// Full objective `F(x)` at a feasible point.
    fn value(&self, x: &DMatrix<f64>) -> f64;
    /// Gradient of the smooth part `f`.
    fn gradient(&self, x: &DMatrix<f64>) -> DMatrix<f64>;
    /// `prox_{step·h}(v)`.
    fn prox(&self, v: DMatrix<f64>, step: f64) -> DMatrix<f64>;
}

#[derive(Debug, Clone, Copy)]
pub struct ApgOptions {
    pub max_iters: usize,
    /// Stop when an accepted step lowers `F` by less than `tol·|F|`; 0 disables.
    pub tol: f64,
    /// Initial Lipschitz constant of `∇f`; doubled if a plain step fails to descend.
    pub lipschitz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApgStop {
    Tolerance,
    MaxIters,
    Callback,
    /// No descent even after repeated step-size halving.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct ApgOutcome {
    pub x: DMatrix<f64>,
    pub value: f64,
    pub iters: usize,
    pub stop: ApgStop,
    pub lipschitz: f64,
}

const MAX_BACKTRACKS: usize = 60;

/// Accelerated proximal gradient with monotone restart.
///
/// A candidate is accepted only if it does not increase `F`; on an increase
/// the momentum is reset and the step is retried from the last accepted
/// iterate. The returned value therefore never exceeds `F(x0)`. `x0` must be
/// feasible for `h`. `on_accept` sees every accepted iterate and may ask to
/// stop by returning `true`.
pub fn minimize<P, C>(problem: &P, x0: DMatrix<f64>, opts: &ApgOptions, mut on_accept: C) -> ApgOutcome
where
    P: Composite + ?Sized,
    C: FnMut(&DMatrix<f64>, f64) -> bool,
{
    let mut lip = if opts.lipschitz.is_finite() && opts.lipschitz > 0.0 {
        opts.lipschitz
    } else {
        1.0
    };
    let mut x = x0;
    let mut fx = problem.value(&x);
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut momentum = false;
    let mut backtracks = 0;

    for it in 1..=opts.max_iters {
        let g = problem.gradient(&y);
        let z = problem.prox(&y - g / lip, 1.0 / lip);
        let fz = problem.value(&z);

        if fz <= fx {
            let decrease = fx - fz;
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &z + (&z - &x) * ((t - 1.0) / t_next);
            x = z;
            fx = fz;
            t = t_next;
            momentum = true;
            if on_accept(&x, fx) {
                return outcome(x, fx, it, ApgStop::Callback, lip);
            }
            if decrease < opts.tol * fx.abs().max(f64::MIN_POSITIVE) {
                return outcome(x, fx, it, ApgStop::Tolerance, lip);
            }
        } else if momentum {
            t = 1.0;
            y = x.clone();
            momentum = false;
        } else {
            // a plain prox-gradient step from x failed to descend
            if fz.is_finite() && fz - fx < opts.tol * fx.abs().max(f64::MIN_POSITIVE) {
                return outcome(x, fx, it, ApgStop::Tolerance, lip);
            }
            backtracks += 1;
            if backtracks > MAX_BACKTRACKS {
                return outcome(x, fx, it, ApgStop::Stalled, lip);
            }
            lip *= 2.0;
        }
    }
    outcome(x, fx, opts.max_iters, ApgStop::MaxIters, lip)
}

fn outcome(x: DMatrix<f64>, value: f64, iters: usize, stop: ApgStop, lipschitz: f64) -> ApgOutcome {
    ApgOutcome {
        x,
        value,
        iters,
        stop,
        lipschitz,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// ½‖Ax − b‖² + t‖x‖₁ over x ≥ 0, a 1-column matrix problem.
    struct Lasso {
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        t: f64,
    }

    impl Composite for Lasso {
        fn value(&self, x: &DMatrix<f64>) -> f64 {
            0.5 * (&self.a * x - &self.b).norm_squared() + self.t * x.sum()
        }
        fn gradient(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
            self.a.tr_mul(&(&self.a * x - &self.b))
        }
        fn prox(&self, v: DMatrix<f64>, step: f64) -> DMatrix<f64> {
            v.map(|e| (e - step * self.t).max(0.0))
        }
    }

    #[test]
    fn nonneg_lasso_reaches_known_solution() {
        // diagonal system: solution is max(b_i - t, 0) / a_i^2 scaled
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 0.5]));
        let b = DMatrix::from_column_slice(3, 1, &[3.0, -1.0, 2.0]);
        let p = Lasso { a, b, t: 0.5 };
        let opts = ApgOptions {
            max_iters: 5000,
            tol: 0.0,
            lipschitz: 4.0,
        };
        let out = minimize(&p, DMatrix::zeros(3, 1), &opts, |_, _| false);
        // x_i = max(a_i b_i − t, 0) / a_i²
        let expect = [2.5, 0.0, (1.0 - 0.5) / 0.25];
        for i in 0..3 {
            assert!((out.x[i] - expect[i]).abs() < 1e-9, "{:?}", out.x);
        }
    }

    #[test]
    fn underestimated_lipschitz_still_descends() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let p = Lasso { a, b, t: 0.0 };
        let opts = ApgOptions {
            max_iters: 2000,
            tol: 1e-15,
            lipschitz: 1e-3,
        };
        let mut last = f64::INFINITY;
        let out = minimize(&p, DMatrix::zeros(2, 1), &opts, |_, f| {
            assert!(f <= last);
            last = f;
            false
        });
        assert!(out.lipschitz > 1e-3);
        // unconstrained solution (0.2, 0.4) is feasible
        assert!((out.x[0] - 0.2).abs() < 1e-6 && (out.x[1] - 0.4).abs() < 1e-6);
    }
}
