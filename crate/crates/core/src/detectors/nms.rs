use crate::detectors::Detection;

/// Greedy non-maximum suppression. Output is sorted by descending score,
/// ties broken by input order.
pub fn nms(mut candidates: Vec<Detection>, iou_threshold: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| candidates[b].score.total_cmp(&candidates[a].score).then(a.cmp(&b)));
    let mut kept: Vec<Detection> = Vec::new();
    for i in order {
        let c = candidates[i];
        if kept.iter().all(|k| k.bbox.iou(&c.bbox) <= iou_threshold) {
            kept.push(c);
        }
    }
    candidates.clear();
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::Stage;
    use crate::imaging::BBox;

    fn det(x: usize, score: f64) -> Detection {
        Detection {
            bbox: BBox::new(x, 0, x + 10, 10).unwrap(),
            score,
            stage: Stage::Final,
        }
    }

    #[test]
    fn identical_max_candidates_collapse() {
        let out = nms(vec![det(0, 0.9), det(0, 0.9), det(40, 0.6)], 0.5);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].score, 0.9);
    }

    #[test]
    fn survivors_pairwise_below_threshold() {
        let cands: Vec<Detection> = (0..30).map(|i| det(i * 2, ((i * 13) % 17) as f64 / 17.0)).collect();
        let out = nms(cands, 0.5);
        for (i, a) in out.iter().enumerate() {
            for b in &out[i + 1..] {
                assert!(a.bbox.iou(&b.bbox) <= 0.5);
            }
        }
        assert!(out.windows(2).all(|w| w[0].score >= w[1].score));
    }
}
