use super::MetricError;
use crate::raster::ProbabilityMap;
use crate::scalar::Scalar;

/// Hellinger distance `||sqrt(P) - sqrt(Q)||_2 / sqrt(2)`, clamped to [0, 1].
pub fn hellinger<S: Scalar>(
    p: &ProbabilityMap<S>,
    q: &ProbabilityMap<S>,
) -> Result<S, MetricError> {
    if !p.same_shape(q) {
        return Err(MetricError::Shape(format!(
            "probability maps are {}x{} and {}x{}",
            p.width(),
            p.height(),
            q.width(),
            q.height()
        )));
    }
    let sum = p
        .values()
        .iter()
        .zip(q.values())
        .map(|(&a, &b)| {
            let d = a.sqrt() - b.sqrt();
            d * d
        })
        .fold(S::zero(), |x, y| x + y);
    let h = (sum / S::of(2.0)).sqrt();
    Ok(h.max(S::zero()).min(S::one()))
}
