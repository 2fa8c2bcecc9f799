//! Central finite-difference verification of analytic gradients.

use crate::error::{CoreError, Result};
use crate::graph::{Graph, NodeId};
use crate::params::ParameterSet;

/// Outcome of a finite-difference sweep over every parameter coordinate.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub coordinates: usize,
}

/// Compares the analytic gradient of a scalar loss against central
/// differences, coordinate by coordinate.
///
/// `build` must construct the loss graph from scratch for the given
/// parameters and return the scalar output node; it is called once for
/// the analytic pass and twice per coordinate for the numeric one.
/// The error metric per coordinate is
/// `|analytic - central| / max(1, |analytic|)`.
pub fn finite_diff_check<F>(params: &ParameterSet, mut build: F, eps: f64) -> Result<GradCheckReport>
where
    F: FnMut(&ParameterSet) -> Result<(Graph, NodeId)>,
{
    if eps <= 0.0 {
        return Err(CoreError::config(format!("epsilon must be positive, got {eps}")));
    }

    let mut analytic = params.clone();
    analytic.zero_grads();
    let (mut g, out) = build(&analytic)?;
    let base = g.scalar(out)?;
    if !base.is_finite() {
        return Err(CoreError::NonFinite {
            context: "gradcheck base loss".into(),
            coordinate: None,
        });
    }
    g.backward_scalar(out)?;
    g.apply_param_grads(&mut analytic, 1.0)?;

    let names: Vec<String> = params.names().map(str::to_string).collect();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        coordinates: 0,
    };

    let mut work = params.clone();
    for name in &names {
        let len = work.get(name)?.value.len();
        for i in 0..len {
            let original = work.get(name)?.value.values()[i];

            work.get_mut(name)?.value.values_mut()[i] = original + eps;
            let (g_plus, out_plus) = build(&work)?;
            let loss_plus = g_plus.scalar(out_plus)?;

            work.get_mut(name)?.value.values_mut()[i] = original - eps;
            let (g_minus, out_minus) = build(&work)?;
            let loss_minus = g_minus.scalar(out_minus)?;

            work.get_mut(name)?.value.values_mut()[i] = original;

            if !loss_plus.is_finite() || !loss_minus.is_finite() {
                return Err(CoreError::NonFinite {
                    context: "gradcheck perturbed loss".into(),
                    coordinate: Some(format!("{name}[{i}]")),
                });
            }

            let central = (loss_plus - loss_minus) / (2.0 * eps);
            let a = analytic.get(name)?.grad.values()[i];
            let rel = (a - central).abs() / a.abs().max(1.0);
            report.coordinates += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_param = name.clone();
                report.worst_index = i;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn linear_loss_is_exact() {
        // loss = sum(theta): analytic gradient all ones.
        let mut params = ParameterSet::new();
        params.insert("theta", Tensor::row(&[0.3, -1.2, 4.0])).unwrap();
        let report = finite_diff_check(
            &params,
            |p| {
                let mut g = Graph::new();
                let t = g.param(p, "theta")?;
                let s = g.sum_all(t);
                Ok((g, s))
            },
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-9, "{report:?}");
        assert_eq!(report.coordinates, 3);
    }

    #[test]
    fn quadratic_loss_is_exact_under_central_differences() {
        // loss = sum(theta^2) at [1, 2]: analytic [2, 4].
        let mut params = ParameterSet::new();
        params.insert("theta", Tensor::row(&[1.0, 2.0])).unwrap();
        let report = finite_diff_check(
            &params,
            |p| {
                let mut g = Graph::new();
                let t = g.param(p, "theta")?;
                let sq = g.mul(t, t)?;
                let s = g.sum_all(sq);
                Ok((g, s))
            },
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_error <= 1e-9, "{report:?}");
    }

    #[test]
    fn two_layer_net_matches_finite_differences() {
        // Random 2-layer tanh net with 17 trainable scalars; checked at 1e-4.
        use crate::params::{init_uniform, seeded_rng};
        let mut rng = seeded_rng(42, 0);
        let mut params = ParameterSet::new();
        params.insert("w1", init_uniform(vec![2, 4], &mut rng)).unwrap();
        params.insert("b1", init_uniform(vec![1, 4], &mut rng)).unwrap();
        params.insert("w2", init_uniform(vec![4, 1], &mut rng)).unwrap();
        params.insert("b2", init_uniform(vec![1, 1], &mut rng)).unwrap();
        assert_eq!(params.scalar_count(), 17);
        let input = init_uniform(vec![1, 2], &mut rng);

        let report = finite_diff_check(
            &params,
            |p| {
                let mut g = Graph::new();
                let x = g.input(&input)?;
                let w1 = g.param(p, "w1")?;
                let b1 = g.param(p, "b1")?;
                let w2 = g.param(p, "w2")?;
                let b2 = g.param(p, "b2")?;
                let h = g.matmul(x, w1)?;
                let h = g.add(h, b1)?;
                let h = g.tanh(h);
                let o = g.matmul(h, w2)?;
                let o = g.add(o, b2)?;
                let sq = g.mul(o, o)?;
                let s = g.sum_all(sq);
                Ok((g, s))
            },
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_error <= 1e-4, "{report:?}");
    }

    #[test]
    fn rejects_nonpositive_epsilon() {
        let params = ParameterSet::new();
        let r = finite_diff_check(&params, |_| unreachable!(), 0.0);
        assert!(r.is_err());
    }
}
