use super::{NumError, Parameterized, Rng};

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Block name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub coords_checked: usize,
}

/// Compares the analytic gradients already stored in `model`'s grad slots
/// against central differences of `f`.
///
/// At most `max_per_block` coordinates per block are probed (all of them when
/// the block is smaller); the sample is drawn from `rng`. Returns the largest
/// `|analytic − numeric| / max(1, |numeric|)`.
pub fn grad_check<M, F>(
    model: &mut M,
    mut f: F,
    h: f64,
    max_per_block: usize,
    rng: &mut Rng,
) -> Result<GradCheckReport, NumError>
where
    M: Parameterized,
    F: FnMut(&M) -> f64,
{
    let analytic: Vec<Vec<f64>> = model
        .blocks()
        .iter()
        .map(|b| b.grad.data().to_vec())
        .collect();
    let names: Vec<String> = model.blocks().iter().map(|b| b.name.clone()).collect();

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        coords_checked: 0,
    };
    for (bi, grads) in analytic.iter().enumerate() {
        let n = grads.len();
        let coords: Vec<usize> = if n <= max_per_block {
            (0..n).collect()
        } else {
            let mut p = rng.permutation(n);
            p.truncate(max_per_block);
            p
        };
        for idx in coords {
            let orig = model.blocks()[bi].value.data()[idx];
            model.blocks_mut()[bi].value.data_mut()[idx] = orig + h;
            let fp = f(model);
            model.blocks_mut()[bi].value.data_mut()[idx] = orig - h;
            let fm = f(model);
            model.blocks_mut()[bi].value.data_mut()[idx] = orig;
            if !fp.is_finite() || !fm.is_finite() {
                return Err(NumError::Probe {
                    block: names[bi].clone(),
                    index: idx,
                });
            }
            let numeric = (fp - fm) / (2.0 * h);
            let rel = (grads[idx] - numeric).abs() / numeric.abs().max(1.0);
            report.coords_checked += 1;
            if report.worst.is_none() || rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = Some((names[bi].clone(), idx));
            }
        }
    }
    Ok(report)
}
