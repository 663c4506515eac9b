use mfjq::kernels::divergence_sup;
use mfjq::solver::Dynamics;
use mfjq::{
    nonlocal_field, truncate_to_ball, wasserstein_1d, ConstantKernel, GridMeasure, HkKernel, InteractionKernel, Measure,
    MomentFunctional, ParticleMeasure, SupportBall, TableKernel, VectorField,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn kernels() -> Vec<Box<dyn InteractionKernel<f64>>> {
    vec![
        Box::new(HkKernel::new(0.05).unwrap()),
        Box::new(HkKernel::new(0.5).unwrap()),
        Box::new(ConstantKernel::unit()),
        Box::new(TableKernel::new(vec![-1.0, -0.2, 0.5, 1.5], vec![0.0, 0.7, -0.4, 0.0]).unwrap()),
    ]
}

fn random_atoms(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> ParticleMeasure<f64> {
    let xs = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    let ws = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    ParticleMeasure::weighted_1d(xs, ws).unwrap()
}

#[test]
fn rule_is_lipschitz_and_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in kernels() {
        let (lip, m) = (k.lipschitz(), k.bound());
        let mut worst = 0.0f64;
        for _ in 0..20_000 {
            let x = rng.gen_range(-3.0..3.0);
            let y = rng.gen_range(-3.0..3.0);
            let h = rng.gen_range(-0.2..0.2);
            let (mut a, mut b, mut c) = ([0.0], [0.0], [0.0]);
            k.rule(&[x], &[y], &mut a);
            k.rule(&[x + h], &[y], &mut b);
            k.rule(&[x], &[y + h], &mut c);
            assert!(a[0].abs() <= m + 1e-12, "{}: |F| = {} > M = {m}", k.name(), a[0].abs());
            if h != 0.0 {
                worst = worst.max((b[0] - a[0]).abs() / h.abs()).max((c[0] - a[0]).abs() / h.abs());
            }
        }
        assert!(worst <= lip * (1.0 + 1e-9), "{}: quotient {worst} > L = {lip}", k.name());
    }
}

#[test]
fn truncated_field_lipschitz_includes_cutoff() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ball = SupportBall::new(3.0).unwrap();
    let taper = 0.5;
    for k in kernels() {
        let mu: Measure<f64> = random_atoms(&mut rng, 40, -3.0, 3.0).into();
        let dynamics = Dynamics::uncontrolled(Some(k.as_ref()), MomentFunctional::variance0(3.0), ball, taper);
        let lip = dynamics.lipschitz();
        let f = truncate_to_ball(nonlocal_field(k.as_ref(), &mu), ball, taper).unwrap();
        let xs: Vec<f64> = (0..=2000).map(|i| -3.5 + 7.0 * i as f64 / 2000.0).collect();
        let d = divergence_sup(&f, &xs);
        assert!(d <= lip * (1.0 + 1e-9), "{}: {d} > {lip}", k.name());
    }
}

#[test]
fn field_is_lipschitz_in_the_measure() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for k in kernels() {
        for _ in 0..50 {
            let mu: Measure<f64> = random_atoms(&mut rng, 30, -2.0, 2.0).into();
            let nu: Measure<f64> = random_atoms(&mut rng, 25, -2.0, 2.0).into();
            let w1 = wasserstein_1d(&mu, &nu, 1.0).unwrap();
            let (fm, fn_) = (nonlocal_field(k.as_ref(), &mu), nonlocal_field(k.as_ref(), &nu));
            for _ in 0..20 {
                let x = rng.gen_range(-3.0..3.0);
                let gap = (fm.eval_1d(x) - fn_.eval_1d(x)).abs();
                assert!(gap <= k.lipschitz() * w1 + 1e-12, "{}: {gap} > L W1 = {}", k.name(), k.lipschitz() * w1);
            }
        }
    }
}

#[test]
fn empirical_field_is_the_weighted_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in kernels() {
        let p = random_atoms(&mut rng, 50, -4.0, 4.0);
        let mu: Measure<f64> = p.clone().into();
        let f = nonlocal_field(k.as_ref(), &mu);
        for _ in 0..100 {
            let x = rng.gen_range(-5.0..5.0);
            let mut direct = 0.0;
            for (y, w) in p.atoms() {
                let mut out = [0.0];
                k.rule(&[x], y, &mut out);
                direct += w * out[0];
            }
            let v = f.eval_1d(x);
            assert!((v - direct).abs() < 1e-13, "{}: {v} vs {direct}", k.name());
            assert!(v.abs() <= k.bound() + 1e-12);
        }
    }
}

#[test]
fn hk_field_on_half_indicator() {
    let k = HkKernel::new(0.05).unwrap();
    let phi = |r: f64| k.phi(r);
    // f(x) = 1/2 int_{-1}^{1} phi(y - x) (y - x) dy, so f'(x) = -1/2 [phi(1 - x)(1 - x) + phi(1 + x)(1 + x)].
    let df = |x: f64| -0.5 * (phi(1.0 - x) * (1.0 - x) + phi(1.0 + x) * (1.0 + x));
    let mu: Measure<f64> = GridMeasure::uniform_on(-1.0, 1.0, 20_000, -1.0, 1.0).unwrap().into();
    let f = nonlocal_field(&k, &mu);
    let xs: Vec<f64> = (0..=600).map(|i| -1.5 + 3.0 * i as f64 / 600.0).collect();
    let exact = xs.windows(2).fold(0.0f64, |m, w| {
        // Sup of |f'| over each sample interval, on a fine sub-grid.
        (0..=50).fold(m, |m, j| m.max(df(w[0] + (w[1] - w[0]) * j as f64 / 50.0).abs()))
    });
    let mean_exact = xs.windows(2).fold(0.0f64, |m, w| {
        let n = 200;
        let avg = (0..n).map(|j| df(w[0] + (w[1] - w[0]) * (j as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64;
        m.max(avg.abs())
    });
    let d = divergence_sup(&f, &xs);
    assert!((exact - 1.0).abs() < 1e-12, "sup |f'| = {exact}");
    // The difference quotient is the interval average of f'.
    assert!((d - mean_exact).abs() < 1e-3, "{d} vs {mean_exact}");
    assert!(d <= exact + 1e-3);
}

proptest! {
    #[test]
    fn hk_rule_is_antisymmetric(x in -5.0..5.0f64, y in -5.0..5.0f64, eps in 0.01..1.0f64) {
        let k = HkKernel::new(eps).unwrap();
        let (mut a, mut b) = ([0.0], [0.0]);
        k.rule(&[x], &[y], &mut a);
        k.rule(&[y], &[x], &mut b);
        prop_assert_eq!(a[0], -b[0]);
        prop_assert!(k.phi(x - y) >= 0.0 && k.phi(x - y) <= 1.0);
    }
}
