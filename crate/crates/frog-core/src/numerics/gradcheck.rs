//! Finite-difference gradient verification. Central differences in 64-bit
//! precision serve as the independent oracle for every analytic gradient in
//! the toolkit; single precision would bury the difference signal in
//! roundoff, so the oracle is pinned to `f64`.

use super::{ParamSet, Tape, Var};
use crate::error::{Error, Result};

/// Default finite-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, serde::Serialize)]
pub struct GradCheckReport {
    /// max over entries of |analytic − numeric| / max(1, |analytic|, |numeric|)
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_entry: usize,
    pub entries_checked: usize,
}

/// Compares analytic gradients of `loss_fn` against central differences.
///
/// `loss_fn` receives a fresh tape, the parameter set (for name lookup via
/// [`ParamSet::bind_vars`]), and the parameter leaves in set order; it must
/// return the scalar loss var. It is re-evaluated twice per parameter entry,
/// so keep the model small; this is an oracle, not a training path.
pub fn grad_check<F>(params: &mut ParamSet<f64>, h: f64, mut loss_fn: F) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape<f64>, &ParamSet<f64>, &[Var]) -> Result<Var>,
{
    assert!(h > 0.0, "finite-difference step must be positive");

    // Analytic pass.
    let mut tape = Tape::new();
    let vars = params.leaves(&mut tape);
    let loss = loss_fn(&mut tape, params, &vars)?;
    let loss_value = tape.value(loss).item();
    if !loss_value.is_finite() {
        return Err(Error::NonFinite("grad_check loss".into()));
    }
    let grads = tape.backward(loss);
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(params.iter())
        .map(|(&v, p)| match grads.get(v) {
            Some(g) => g.as_slice().to_vec(),
            None => vec![0.0; p.value.len()],
        })
        .collect();
    drop(tape);

    let mut eval = |params: &ParamSet<f64>| -> Result<f64> {
        let mut tape = Tape::new();
        let vars = params.leaves(&mut tape);
        let loss = loss_fn(&mut tape, params, &vars)?;
        let v = tape.value(loss).item();
        if !v.is_finite() {
            return Err(Error::NonFinite("grad_check loss".into()));
        }
        Ok(v)
    };

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_entry: 0,
        entries_checked: 0,
    };

    let n_params = params.len();
    for pi in 0..n_params {
        let n_entries = {
            let p = params.iter().nth(pi).expect("index in range");
            p.value.len()
        };
        for ei in 0..n_entries {
            let original = {
                let p = params.iter().nth(pi).unwrap();
                p.value.as_slice()[ei]
            };
            set_entry(params, pi, ei, original + h);
            let plus = eval(params)?;
            set_entry(params, pi, ei, original - h);
            let minus = eval(params)?;
            set_entry(params, pi, ei, original);

            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[pi][ei];
            let denom = 1.0_f64.max(a.abs()).max(numeric.abs());
            let rel = (a - numeric).abs() / denom;
            report.entries_checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_param = params.iter().nth(pi).unwrap().id.clone();
                report.worst_entry = ei;
            }
        }
    }
    Ok(report)
}

fn set_entry(params: &mut ParamSet<f64>, pi: usize, ei: usize, x: f64) {
    let p = params.iter_mut().nth(pi).expect("index in range");
    p.value.as_mut_slice()[ei] = x;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    #[test]
    fn quadratic_matches_central_difference() {
        let mut params = ParamSet::new();
        params.insert("x", Tensor::scalar(3.0)).unwrap();
        let report = grad_check(&mut params, 1e-5, |tape, _, vars| Ok(tape.mul(vars[0], vars[0])))
            .unwrap();
        // Central differences are exact on quadratics up to roundoff.
        assert!(report.max_rel_err <= 1e-9, "rel err {}", report.max_rel_err);
        assert_eq!(report.entries_checked, 1);
    }

    #[test]
    fn constant_loss_has_zero_error() {
        let mut params = ParamSet::new();
        params.insert("x", Tensor::row(vec![1.0, -2.0])).unwrap();
        let report = grad_check(&mut params, 1e-5, |tape, _, _| {
            Ok(tape.leaf(Tensor::scalar(4.25)))
        })
        .unwrap();
        assert_eq!(report.max_rel_err, 0.0);
        assert_eq!(report.entries_checked, 2);
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let mut params = ParamSet::new();
        params.insert("x", Tensor::scalar(-1.0)).unwrap();
        let out = grad_check(&mut params, 1e-5, |tape, _, vars| {
            // ln of a negative number -> NaN
            Ok(tape.ln(vars[0]))
        });
        assert!(out.is_err());
    }
}
