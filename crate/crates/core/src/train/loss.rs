use crate::neuro::{NeuroError, Param, Tensor};

/// `(1/n) Σ (ŷ − y)² + λ ‖θ‖²` and the gradient with respect to `pred`.
pub fn mse_l2(pred: &Tensor, truth: &Tensor, params: &[&Param], lambda: f64) -> Result<(f64, Tensor), NeuroError> {
    truth.expect_shape(pred.shape(), "truth")?;
    let n = pred.len() as f64;
    let mut grad = Tensor::zeros(pred.shape());
    let mut sse = 0.0;
    for ((g, p), t) in grad.data_mut().iter_mut().zip(pred.data()).zip(truth.data()) {
        let d = p - t;
        sse += d * d;
        *g = 2.0 * d / n;
    }
    Ok((sse / n + lambda * l2_norm_sq(params), grad))
}

pub fn l2_norm_sq(params: &[&Param]) -> f64 {
    params.iter().map(|p| p.value.sum_squares()).sum()
}

/// Adds the penalty gradient `2λθ` to every parameter.
pub fn add_l2_grad(params: &mut [&mut Param], lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    for p in params.iter_mut() {
        for (g, v) in p.grad.data_mut().iter_mut().zip(p.value.data()) {
            *g += 2.0 * lambda * v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuro::ComponentTag;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], d: Vec<f64>) -> Tensor {
        Tensor::from_vec(shape, d).unwrap()
    }

    #[test]
    fn equal_tensors_give_zero() {
        let a = t(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let (l, g) = mse_l2(&a, &a, &[], 0.0).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unit_offsets() {
        let (l, g) = mse_l2(&t(&[2], vec![1.0, 1.0]), &t(&[2], vec![0.0, 0.0]), &[], 0.0).unwrap();
        assert_eq!(l, 1.0);
        assert_eq!(g.data(), &[1.0, 1.0]);
    }

    #[test]
    fn shape_mismatch() {
        assert!(mse_l2(&Tensor::zeros(&[2]), &Tensor::zeros(&[3]), &[], 0.0).is_err());
    }

    #[test]
    fn matches_scalar_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pred: Vec<f64> = (0..37).map(|_| rng.random_range(-2.0..2.0)).collect();
        let truth: Vec<f64> = (0..37).map(|_| rng.random_range(-2.0..2.0)).collect();
        let theta: Vec<f64> = (0..11).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = Param::new("w", ComponentTag::Monolithic, t(&[11], theta.clone()));
        let lambda = 1e-5;
        let (l, _) = mse_l2(&t(&[37], pred.clone()), &t(&[37], truth.clone()), &[&p], lambda).unwrap();
        let mut sse = 0.0;
        for i in 0..37 {
            sse += (truth[i] - pred[i]) * (truth[i] - pred[i]);
        }
        let mut norm = 0.0;
        for v in &theta {
            norm += v * v;
        }
        let oracle = sse / 37.0 + lambda * norm;
        assert!((l - oracle).abs() < 1e-12, "{l} vs {oracle}");
    }

    #[test]
    fn penalty_gradient() {
        let mut p = Param::new("w", ComponentTag::Monolithic, t(&[3], vec![1.0, -2.0, 0.5]));
        add_l2_grad(&mut [&mut p], 0.1);
        assert_eq!(p.grad.data(), &[0.2, -0.4, 0.1]);
    }
}
