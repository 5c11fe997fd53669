//! Gaussian-process surrogate with a Matérn-5/2 kernel and the expected
//! improvement acquisition.

/// Lengthscales and noise levels tried when fitting; the pair with the
/// highest log marginal likelihood wins.
const LENGTHSCALES: [f64; 7] = [0.1, 0.2, 0.35, 0.5, 0.8, 1.2, 2.0];
const NOISE: [f64; 4] = [1e-6, 1e-3, 1e-2, 1e-1];

pub fn matern52(a: &[f64], b: &[f64], lengthscale: f64) -> f64 {
    let r = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt() / lengthscale;
    let s = 5f64.sqrt() * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let sum = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i][i] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Some(l)
}

fn forward_sub(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; b.len()];
    for i in 0..b.len() {
        let s: f64 = (0..i).map(|k| l[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / l[i][i];
    }
    x
}

fn backward_sub_t(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (b[i] - s) / l[i][i];
    }
    x
}

#[derive(Clone, Debug)]
pub struct GaussianProcess {
    x: Vec<Vec<f64>>,
    chol: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    pub lengthscale: f64,
    pub noise: f64,
    y_mean: f64,
    y_std: f64,
}

impl GaussianProcess {
    /// Fits on standardized targets; `None` if no kernel setting is
    /// numerically usable.
    pub fn fit(x: &[Vec<f64>], y: &[f64]) -> Option<Self> {
        let n = y.len();
        if n == 0 || x.len() != n {
            return None;
        }
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_std = if var > 1e-24 { var.sqrt() } else { 1.0 };
        let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_std).collect();

        let mut best: Option<(f64, GaussianProcess)> = None;
        for &ls in &LENGTHSCALES {
            for &noise in &NOISE {
                let k: Vec<Vec<f64>> = (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| matern52(&x[i], &x[j], ls) + if i == j { noise } else { 0.0 })
                            .collect()
                    })
                    .collect();
                let Some(chol) = cholesky(&k) else { continue };
                let alpha = backward_sub_t(&chol, &forward_sub(&chol, &ys));
                let fit: f64 = ys.iter().zip(&alpha).map(|(a, b)| a * b).sum();
                let log_det: f64 = chol.iter().enumerate().map(|(i, r)| r[i].ln()).sum();
                let lml = -0.5 * fit - log_det;
                if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                    best = Some((
                        lml,
                        GaussianProcess {
                            x: x.to_vec(),
                            chol,
                            alpha,
                            lengthscale: ls,
                            noise,
                            y_mean,
                            y_std,
                        },
                    ));
                }
            }
        }
        best.map(|(_, gp)| gp)
    }

    /// Posterior mean and standard deviation in the original units.
    pub fn predict(&self, point: &[f64]) -> (f64, f64) {
        let k: Vec<f64> = self.x.iter().map(|xi| matern52(xi, point, self.lengthscale)).collect();
        let mean: f64 = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = forward_sub(&self.chol, &k);
        let var = (1.0 - v.iter().map(|e| e * e).sum::<f64>()).max(0.0);
        (self.y_mean + self.y_std * mean, self.y_std * var.sqrt())
    }
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Expected improvement of a maximization objective over `incumbent`.
pub fn expected_improvement(mean: f64, sd: f64, incumbent: f64, xi: f64) -> f64 {
    let gain = mean - incumbent - xi;
    if sd <= 1e-12 {
        return gain.max(0.0);
    }
    let z = gain / sd;
    gain * normal_cdf(z) + sd * normal_pdf(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_training_points() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0]).collect();
        let y: Vec<f64> = x.iter().map(|p| (6.0 * p[0]).sin()).collect();
        let gp = GaussianProcess::fit(&x, &y).unwrap();
        for (p, t) in x.iter().zip(&y) {
            let (m, s) = gp.predict(p);
            assert!((m - t).abs() < 0.05, "{m} vs {t}");
            assert!(s < 0.2);
        }
        let (_, far) = gp.predict(&[5.0]);
        assert!(far > 0.5);
    }

    #[test]
    fn ei_properties() {
        assert!(expected_improvement(1.0, 0.0, 0.5, 0.0) == 0.5);
        assert_eq!(expected_improvement(0.0, 0.0, 0.5, 0.0), 0.0);
        let low = expected_improvement(0.0, 0.1, 0.5, 0.0);
        let high = expected_improvement(0.0, 1.0, 0.5, 0.0);
        assert!(high > low && low > 0.0);
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.96) - 0.975).abs() < 1e-3);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        assert!(cholesky(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_none());
        let l = cholesky(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        assert_eq!(l[0][0], 2.0);
        assert_eq!(l[1][0], 1.0);
        assert!((l[1][1] - 2f64.sqrt()).abs() < 1e-15);
    }
}
