use crate::error::{Error, Result};

fn check(op: &'static str, pred: &[f64], truth: &[f64], min: usize) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::dim(op, truth.len(), pred.len()));
    }
    if pred.len() < min {
        return Err(Error::config(format!("{op} needs at least {min} values, got {}", pred.len())));
    }
    Ok(())
}

/// Mean squared error.
pub fn mse_metric(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check("mse_metric", pred, truth, 1)?;
    let sum: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / pred.len() as f64)
}

/// Pearson correlation. A constant input has no defined correlation and is
/// reported as [`Error::UndefinedCorrelation`] rather than coerced to 0.
pub fn pcc_metric(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check("pcc_metric", pred, truth, 2)?;
    for (name, v) in [("prediction", pred), ("truth", truth)] {
        if v.iter().all(|&x| x == v[0]) {
            return Err(Error::UndefinedCorrelation(format!("{name} vector is constant")));
        }
    }
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mt = truth.iter().sum::<f64>() / n;
    let (mut cov, mut vp, mut vt) = (0.0, 0.0, 0.0);
    for (p, t) in pred.iter().zip(truth) {
        let (dp, dt) = (p - mp, t - mt);
        cov += dp * dt;
        vp += dp * dp;
        vt += dt * dt;
    }
    Ok((cov / (vp.sqrt() * vt.sqrt())).clamp(-1.0, 1.0))
}

/// PCC as an option: `None` when undefined.
pub fn pcc_or_undefined(pred: &[f64], truth: &[f64]) -> Result<Option<f64>> {
    match pcc_metric(pred, truth) {
        Ok(r) => Ok(Some(r)),
        Err(Error::UndefinedCorrelation(_)) => Ok(None),
        Err(e) => Err(e),
    }
}
