use crate::imaging::{otsu_binarize, BBox, SaliencyMap};

/// Pixels covered by at least one box, row-major.
pub fn union_mask(gt: &[BBox], height: usize, width: usize) -> Vec<bool> {
    let mut mask = vec![false; height * width];
    for b in gt {
        for y in b.y1..b.y2.min(height) {
            for x in b.x1..b.x2.min(width) {
                mask[y * width + x] = true;
            }
        }
    }
    mask
}

/// Energy-based pointing game: share of the saliency mass inside the union
/// of the ground-truth boxes. `None` without ground truth, 0 for an empty
/// map.
pub fn ebpg(s: &SaliencyMap, gt: &[BBox]) -> Option<f64> {
    if gt.is_empty() {
        return None;
    }
    let inside = union_mask(gt, s.height, s.width);
    let (mut hit, mut total) = (0.0, 0.0);
    for (v, m) in s.values.iter().zip(&inside) {
        total += v;
        if *m {
            hit += v;
        }
    }
    Some(if total > 0.0 { (hit / total).clamp(0.0, 1.0) } else { 0.0 })
}

/// Tight box around the Otsu foreground of the map. `None` when the map is
/// constant or its histogram cannot be split.
pub fn explanation_box(s: &SaliencyMap) -> Option<BBox> {
    let fg = otsu_binarize(&s.values).ok()?;
    let (mut x1, mut y1, mut x2, mut y2) = (usize::MAX, usize::MAX, 0, 0);
    for (i, on) in fg.iter().enumerate() {
        if *on {
            let (y, x) = (i / s.width, i % s.width);
            x1 = x1.min(x);
            y1 = y1.min(y);
            x2 = x2.max(x + 1);
            y2 = y2.max(y + 1);
        }
    }
    BBox::new(x1, y1, x2, y2).ok()
}

/// Mean IoU between the explanation box and each ground-truth box. A map
/// without an Otsu split scores 0.
pub fn iou_metric(s: &SaliencyMap, gt: &[BBox]) -> Option<f64> {
    if gt.is_empty() {
        return None;
    }
    let Some(eb) = explanation_box(s) else {
        log::warn!("{}: saliency has no Otsu split, IoU set to 0", s.method);
        return Some(0.0);
    };
    Some(gt.iter().map(|g| eb.iou(g)).sum::<f64>() / gt.len() as f64)
}

/// Share of the `N` most salient pixels falling inside the ground truth,
/// `N` being the ground-truth pixel count. Ties go to the lower row-major
/// index.
pub fn bbox_metric(s: &SaliencyMap, gt: &[BBox]) -> Option<f64> {
    if gt.is_empty() {
        return None;
    }
    let inside = union_mask(gt, s.height, s.width);
    let n = inside.iter().filter(|m| **m).count();
    let mut order: Vec<usize> = (0..s.values.len()).collect();
    order.sort_by(|a, b| s.values[*b].total_cmp(&s.values[*a]).then(a.cmp(b)));
    let hits = order[..n].iter().filter(|i| inside[**i]).count();
    Some(hits as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(h: usize, w: usize, values: Vec<f64>) -> SaliencyMap {
        SaliencyMap::new(h, w, values, "t").unwrap()
    }

    fn indicator(h: usize, w: usize, b: BBox) -> SaliencyMap {
        map(h, w, union_mask(&[b], h, w).iter().map(|m| if *m { 1.0 } else { 0.0 }).collect())
    }

    #[test]
    fn indicator_scores_one() {
        let b = BBox::new(2, 3, 7, 6).unwrap();
        let s = indicator(10, 10, b);
        assert_eq!(ebpg(&s, &[b]), Some(1.0));
        assert_eq!(iou_metric(&s, &[b]), Some(1.0));
        assert_eq!(bbox_metric(&s, &[b]), Some(1.0));
    }

    #[test]
    fn disjoint_scores_zero() {
        let s = indicator(10, 10, BBox::new(0, 0, 3, 3).unwrap());
        let gt = [BBox::new(5, 5, 9, 9).unwrap()];
        assert_eq!(ebpg(&s, &gt), Some(0.0));
        assert_eq!(iou_metric(&s, &gt), Some(0.0));
        assert_eq!(bbox_metric(&s, &gt), Some(0.0));
    }

    #[test]
    fn uniform_map_gives_area_share() {
        let s = map(8, 8, vec![0.5; 64]);
        let gt = [BBox::new(0, 0, 4, 4).unwrap()];
        assert!((ebpg(&s, &gt).unwrap() - 0.25).abs() < 1e-12);
        // ties resolve row-major: the first 16 pixels are rows 0 and 1
        assert_eq!(bbox_metric(&s, &gt), Some(8.0 / 16.0));
        assert_eq!(iou_metric(&s, &gt), Some(0.0));
    }

    #[test]
    fn offset_block_iou() {
        let s = indicator(6, 6, BBox::new(1, 1, 3, 3).unwrap());
        let gt = [BBox::new(2, 2, 4, 4).unwrap()];
        assert!((iou_metric(&s, &gt).unwrap() - 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn empty_gt_is_absent() {
        let s = map(4, 4, vec![1.0; 16]);
        assert_eq!(ebpg(&s, &[]), None);
        assert_eq!(iou_metric(&s, &[]), None);
        assert_eq!(bbox_metric(&s, &[]), None);
        assert_eq!(ebpg(&map(4, 4, vec![0.0; 16]), &[BBox::new(0, 0, 1, 1).unwrap()]), Some(0.0));
    }

    #[test]
    fn multiple_gt_average() {
        let a = BBox::new(0, 0, 2, 2).unwrap();
        let b = BBox::new(4, 4, 6, 6).unwrap();
        let s = indicator(6, 6, a);
        assert_eq!(iou_metric(&s, &[a, b]), Some(0.5));
    }

    proptest! {
        #[test]
        fn ebpg_scale_invariant(v in proptest::collection::vec(0.0f64..1.0, 36), k in 0.01f64..100.0) {
            let gt = [BBox::new(1, 2, 4, 5).unwrap()];
            let a = ebpg(&map(6, 6, v.clone()), &gt).unwrap();
            let b = ebpg(&map(6, 6, v.iter().map(|x| x * k).collect()), &gt).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn bbox_rank_invariant(v in proptest::collection::vec(0u8..6, 36)) {
            let gt = [BBox::new(0, 1, 3, 5).unwrap()];
            let base: Vec<f64> = v.iter().map(|x| *x as f64).collect();
            let warped: Vec<f64> = base.iter().map(|x| (x * 0.7).exp() + 3.0).collect();
            prop_assert_eq!(bbox_metric(&map(6, 6, base), &gt), bbox_metric(&map(6, 6, warped), &gt));
        }

        #[test]
        fn metrics_in_unit_interval(v in proptest::collection::vec(0.0f64..1.0, 36), x in 0usize..5, y in 0usize..5) {
            let gt = [BBox::new(x, y, x + 1 + (5 - x) / 2, y + 1).unwrap()];
            let s = map(6, 6, v);
            for m in [ebpg(&s, &gt), iou_metric(&s, &gt), bbox_metric(&s, &gt)] {
                let m = m.unwrap();
                prop_assert!((0.0..=1.0).contains(&m));
            }
        }
    }
}
