use crate::geometry::{delay_map, Deployment, VoxelGrid};
use crate::image::Image;

/// Delay bin of every voxel, computed once per deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayMap {
    pub bins: Vec<usize>,
    pub los_bin: usize,
}

impl DelayMap {
    pub fn new(grid: &VoxelGrid, deployment: &Deployment, sampling_period_ns: f64, los_bin: usize) -> Self {
        Self { bins: delay_map(grid, deployment, sampling_period_ns, los_bin), los_bin }
    }
}

/// `l_n = (alpha[k_n] - alpha[k_n - 1])+`, with the bin before 0 reading zero
/// and voxels past the last bin left at zero.
pub fn uwb_image(alpha: &[f64], delays: &DelayMap) -> Image {
    let values = delays
        .bins
        .iter()
        .map(|&k| {
            if k >= alpha.len() {
                return 0.0;
            }
            let prev = if k == 0 { 0.0 } else { alpha[k - 1] };
            (alpha[k] - prev).max(0.0)
        })
        .collect();
    Image::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Rect};
    use proptest::prelude::*;

    fn setup() -> (VoxelGrid, DelayMap) {
        let d = Deployment {
            room: Rect::new(0.0, 0.0, 3.0, 4.0),
            rss_nodes: vec![Point::new(-0.2, 0.0), Point::new(3.2, 0.0)],
            uwb_tx: Point::new(-0.2, 1.5),
            uwb_rx: Point::new(-0.2, 2.5),
        };
        let g = VoxelGrid::new(&d.room, 0.15).unwrap();
        let m = DelayMap::new(&g, &d, 1.0, 2);
        (g, m)
    }

    #[test]
    fn step_lights_only_its_band() {
        let (_, map) = setup();
        let k_star = 10;
        let alpha: Vec<f64> = (0..40).map(|k| if k >= k_star { 1.0 } else { 0.0 }).collect();
        let img = uwb_image(&alpha, &map);
        for (v, &k) in img.values.iter().zip(&map.bins) {
            assert_eq!(*v, if k == k_star { 1.0 } else { 0.0 });
        }
        assert!(img.values.iter().any(|&v| v > 0.0));
    }

    #[test]
    fn constant_alpha_is_blank_except_first_bin() {
        let (_, map) = setup();
        let img = uwb_image(&[0.7; 40], &map);
        // no voxel sits at bin 0 since the LoS bin is 2
        assert!(img.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bin_zero_uses_zero_predecessor() {
        let map = DelayMap { bins: vec![0, 1, 5], los_bin: 0 };
        let img = uwb_image(&[0.3, 0.2, 0.9], &map);
        assert_eq!(img.values, vec![0.3, 0.0, 0.0]);
    }

    #[test]
    fn row_sum_telescopes() {
        // monotone alpha; along a row the bins are consecutive, so the sum of
        // positive differences over the distinct bins equals
        // alpha[max] - alpha[min - 1]
        let (grid, map) = setup();
        let alpha: Vec<f64> = (0..60).map(|k| (k as f64 / 60.0).powi(2)).collect();
        let img = uwb_image(&alpha, &map);
        let mut checked = 0;
        for iy in 0..grid.ny {
            let mut bins: Vec<usize> = (0..grid.nx).map(|ix| map.bins[grid.index(ix, iy)]).collect();
            bins.sort();
            bins.dedup();
            let consecutive = bins.windows(2).all(|w| w[1] == w[0] + 1);
            if !consecutive {
                continue;
            }
            let (lo, hi) = (bins[0], *bins.last().unwrap());
            let mut seen = std::collections::HashSet::new();
            let mut sum = 0.0;
            for ix in 0..grid.nx {
                let n = grid.index(ix, iy);
                if seen.insert(map.bins[n]) {
                    sum += img.values[n];
                }
            }
            let prev = if lo == 0 { 0.0 } else { alpha[lo - 1] };
            assert!((sum - (alpha[hi] - prev)).abs() < 1e-12);
            checked += 1;
        }
        assert!(checked > grid.ny / 2, "{checked}");
    }

    #[test]
    fn bins_past_profile_are_zero() {
        let map = DelayMap { bins: vec![3, 9], los_bin: 0 };
        assert_eq!(uwb_image(&[0.0, 0.0, 0.0, 1.0], &map).values, vec![1.0, 0.0]);
    }

    proptest! {
        #[test]
        fn never_negative(alpha in proptest::collection::vec(-2.0f64..2.0, 1..50)) {
            let (_, map) = setup();
            prop_assert!(uwb_image(&alpha, &map).values.iter().all(|&v| v >= 0.0));
        }
    }
}
