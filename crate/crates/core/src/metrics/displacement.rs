use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::geometry::Trajectory;
use crate::scalar::Scalar;
use crate::scene::PredictionSet;

/// Displacement errors of a prediction set against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdeFde<S = f64> {
    /// Best-of-K average displacement error.
    pub bon_ade: S,
    pub bon_fde: S,
    /// Mean over the K samples.
    pub mean_ade: S,
    pub mean_fde: S,
}

pub fn ade_fde<S: Scalar>(
    preds: &PredictionSet<S>,
    gt: &Trajectory<S>,
) -> Result<AdeFde<S>, MetricError> {
    if preds.horizon() != gt.len() {
        return Err(MetricError::LengthMismatch {
            left: preds.horizon(),
            right: gt.len(),
        });
    }
    let t = S::of_usize(gt.len());
    let k = S::of_usize(preds.k());
    let mut out = AdeFde {
        bon_ade: S::infinity(),
        bon_fde: S::infinity(),
        mean_ade: S::zero(),
        mean_fde: S::zero(),
    };
    for traj in preds.trajectories() {
        let ade = traj
            .points()
            .iter()
            .zip(gt.points())
            .map(|(p, g)| p.dist(g))
            .fold(S::zero(), |a, b| a + b)
            / t;
        let fde = traj.last().dist(&gt.last());
        out.bon_ade = out.bon_ade.min(ade);
        out.bon_fde = out.bon_fde.min(fde);
        out.mean_ade = out.mean_ade + ade;
        out.mean_fde = out.mean_fde + fde;
    }
    out.mean_ade = out.mean_ade / k;
    out.mean_fde = out.mean_fde / k;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    fn gt() -> Trajectory {
        Trajectory::from_xy(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], 0.4).unwrap()
    }

    #[test]
    fn perfect_prediction() {
        let p = PredictionSet::new(vec![gt()], None, 0).unwrap();
        let r = ade_fde(&p, &gt()).unwrap();
        assert_eq!(
            (r.bon_ade, r.bon_fde, r.mean_ade, r.mean_fde),
            (0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn unit_offset() {
        let off = gt().map_points(|p| Point2::new(p.x, p.y + 1.0)).unwrap();
        let r = ade_fde(
            &PredictionSet::new(vec![off.clone()], None, 0).unwrap(),
            &gt(),
        )
        .unwrap();
        assert_eq!((r.bon_ade, r.bon_fde), (1.0, 1.0));

        let both = PredictionSet::new(vec![gt(), off], None, 0).unwrap();
        let r = ade_fde(&both, &gt()).unwrap();
        assert_eq!(r.bon_ade, 0.0);
        assert_eq!(r.mean_ade, 0.5);
        assert_eq!(r.mean_fde, 0.5);
    }

    #[test]
    fn length_mismatch() {
        let short = Trajectory::from_xy(&[(0.0, 0.0)], 0.4).unwrap();
        let p = PredictionSet::new(vec![short], None, 0).unwrap();
        assert!(ade_fde(&p, &gt()).is_err());
    }
}
