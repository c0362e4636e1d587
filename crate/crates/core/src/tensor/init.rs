use rand::Rng;

/// Kaiming-uniform draw for a weight with `fan_in` inputs, matching the
/// usual `a = sqrt(5)` default: bound = 1 / sqrt(fan_in).
pub fn kaiming_uniform<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, count: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    uniform(rng, -bound, bound, count)
}

pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count).map(|_| rng.random_range(lo..hi)).collect()
}
