//! Combining the RTI and UWB images into one position estimate.
//!
//! Three combinations are offered: a voxel-wise product of the two
//! normalized images, a joint regularized inversion with the UWB change
//! profile appended to the link measurements, and a split estimate taking
//! the row from RTI and the column from the UWB image along that row.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, VoxelGrid};
use crate::image::{argmax, Image};
use crate::rti::{projection_with_prior, PriorPrecision};
use crate::uwb::DelayMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionMethod {
    Product,
    Joint,
    #[serde(rename = "xfromy")]
    XFromY,
}

impl FusionMethod {
    pub fn name(&self) -> &'static str {
        match self {
            FusionMethod::Product => "product",
            FusionMethod::Joint => "joint",
            FusionMethod::XFromY => "xfromy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateStatus {
    Valid,
    /// Image maximum at or below the empty-area threshold.
    EmptyArea,
    /// An input image is flat and cannot be normalized.
    FlatImage,
    /// The UWB row was blank; the RTI estimate was used unchanged.
    RowFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionEstimate {
    pub t: f64,
    pub voxel: Option<usize>,
    pub position: Option<Point>,
    pub status: EstimateStatus,
}

impl PositionEstimate {
    pub fn at(t: f64, grid: &VoxelGrid, voxel: usize, status: EstimateStatus) -> Self {
        Self { t, voxel: Some(voxel), position: Some(grid.center(voxel)), status }
    }

    pub fn invalid(t: f64, status: EstimateStatus) -> Self {
        Self { t, voxel: None, position: None, status }
    }

    /// Usable for tracking: valid, or flagged fallback with a position.
    pub fn is_valid(&self) -> bool {
        self.position.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedImage {
    pub image: Image,
    pub rti_t: f64,
    pub uwb_t: f64,
    pub method: FusionMethod,
}

/// Shifts the minimum to zero and scales to unit sum. `None` for flat images.
pub fn normalize(img: &Image) -> Option<Image> {
    let min = img.min();
    let shifted: Vec<f64> = img.values.iter().map(|v| v - min).collect();
    let sum: f64 = shifted.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return None;
    }
    Some(Image::new(shifted.into_iter().map(|v| v / sum).collect()))
}

fn product(a: &Image, b: &Image) -> Image {
    Image::new(a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect())
}

fn same_grid(a: &Image, b: &Image) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension { what: "image voxels", expected: a.len(), got: b.len() });
    }
    Ok(())
}

/// Voxel-wise product of the two images. The raw product is tested against
/// `t_e`; surviving frames are re-multiplied after normalizing each input and
/// the estimate is the argmax of that normalized product.
pub fn fuse_product(
    rti: &Image,
    uwb: &Image,
    t_e: f64,
    grid: &VoxelGrid,
    (rti_t, uwb_t): (f64, f64),
) -> Result<(Option<CombinedImage>, PositionEstimate)> {
    same_grid(rti, uwb)?;
    if product(rti, uwb).max() <= t_e {
        return Ok((None, PositionEstimate::invalid(uwb_t, EstimateStatus::EmptyArea)));
    }
    let (Some(r), Some(u)) = (normalize(rti), normalize(uwb)) else {
        return Ok((None, PositionEstimate::invalid(uwb_t, EstimateStatus::FlatImage)));
    };
    let combined = product(&r, &u);
    let est = match combined.argmax() {
        Some(n) if combined.values[n] > 0.0 => PositionEstimate::at(uwb_t, grid, n, EstimateStatus::Valid),
        _ => PositionEstimate::invalid(uwb_t, EstimateStatus::FlatImage),
    };
    Ok((Some(CombinedImage { image: combined, rti_t, uwb_t, method: FusionMethod::Product }), est))
}

/// Argmax of a single image gated by the empty-area threshold.
pub fn locate(img: &Image, t_e: f64, grid: &VoxelGrid, t: f64) -> PositionEstimate {
    match img.argmax() {
        Some(n) if img.values[n] > t_e => PositionEstimate::at(t, grid, n, EstimateStatus::Valid),
        _ => PositionEstimate::invalid(t, EstimateStatus::EmptyArea),
    }
}

/// Row from the RTI argmax, column from the UWB image maximum along that row.
pub fn fuse_x_from_y(rti: &Image, uwb: &Image, t_e: f64, grid: &VoxelGrid, t: f64) -> Result<PositionEstimate> {
    same_grid(rti, uwb)?;
    if rti.len() != grid.len() {
        return Err(Error::Dimension { what: "image voxels", expected: grid.len(), got: rti.len() });
    }
    let base = locate(rti, t_e, grid, t);
    let Some(n) = base.voxel else {
        return Ok(base);
    };
    let iy = grid.coords(n).1;
    let row = &uwb.values[grid.index(0, iy)..grid.index(0, iy) + grid.nx];
    match argmax(row) {
        Some(ix) if row[ix] > 0.0 => Ok(PositionEstimate::at(t, grid, grid.index(ix, iy), EstimateStatus::Valid)),
        _ => Ok(PositionEstimate { status: EstimateStatus::RowFallback, ..base }),
    }
}

/// Ideal change profile of a target in each voxel: a unit step starting at the
/// voxel's delay bin, each column scaled to unit sum. Voxels beyond the
/// profile get an empty column.
pub fn uwb_weight_matrix(delays: &DelayMap, bins: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(bins, delays.bins.len());
    for (n, &k) in delays.bins.iter().enumerate() {
        if k >= bins {
            continue;
        }
        let v = 1.0 / (bins - k) as f64;
        for row in k..bins {
            w[(row, n)] = v;
        }
    }
    w
}

/// Regularized inversion of the link measurements stacked on the UWB change
/// profile.
#[derive(Debug, Clone)]
pub struct JointInversion {
    pub projection: DMatrix<f64>,
    pub n_links: usize,
    pub bins: usize,
}

impl JointInversion {
    pub fn new(w_rss: &DMatrix<f64>, delays: &DelayMap, bins: usize, prior: &PriorPrecision) -> Result<Self> {
        if w_rss.ncols() != delays.bins.len() {
            return Err(Error::Dimension { what: "delay map voxels", expected: w_rss.ncols(), got: delays.bins.len() });
        }
        let w_uwb = uwb_weight_matrix(delays, bins);
        let mut stacked = DMatrix::zeros(w_rss.nrows() + bins, w_rss.ncols());
        stacked.rows_mut(0, w_rss.nrows()).copy_from(w_rss);
        stacked.rows_mut(w_rss.nrows(), bins).copy_from(&w_uwb);
        let projection = projection_with_prior(&stacked, prior)?;
        Ok(Self { projection, n_links: w_rss.nrows(), bins })
    }

    /// Joint image for link measurements `y_rss` and change profile `alpha`
    /// (scaled to unit sum before stacking).
    pub fn image(&self, y_rss: &[f64], alpha: &[f64]) -> Result<Image> {
        if y_rss.len() != self.n_links {
            return Err(Error::Dimension { what: "link measurements", expected: self.n_links, got: y_rss.len() });
        }
        if alpha.len() != self.bins {
            return Err(Error::Dimension { what: "UWB profile bins", expected: self.bins, got: alpha.len() });
        }
        let total: f64 = alpha.iter().sum();
        let scale = if total > 0.0 { 1.0 / total } else { 0.0 };
        let y = DVector::from_iterator(
            self.n_links + self.bins,
            y_rss.iter().copied().chain(alpha.iter().map(|a| a * scale)),
        );
        Ok(Image::new((&self.projection * y).as_slice().to_vec()))
    }

    pub fn fuse(
        &self,
        y_rss: &[f64],
        alpha: &[f64],
        t_e: f64,
        grid: &VoxelGrid,
        (rti_t, uwb_t): (f64, f64),
    ) -> Result<(CombinedImage, PositionEstimate)> {
        let image = self.image(y_rss, alpha)?;
        let est = locate(&image, t_e, grid, uwb_t);
        Ok((CombinedImage { image, rti_t, uwb_t, method: FusionMethod::Joint }, est))
    }
}

/// Pairs every UWB frame with the latest RTI frame at or before it. UWB
/// frames preceding the first RTI frame are dropped. Both inputs are sorted
/// timestamps; output is `(rti_index, uwb_index)`.
pub fn synchronize(rti_ts: &[f64], uwb_ts: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(uwb_ts.len());
    let mut next = 0;
    for (u, &t) in uwb_ts.iter().enumerate() {
        while next < rti_ts.len() && rti_ts[next] <= t {
            next += 1;
        }
        if next > 0 {
            out.push((next - 1, u));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Deployment, LinkSet, Rect};
    use crate::rti::{compute_weight_matrix, RtiParams};
    use proptest::prelude::*;

    fn grid() -> VoxelGrid {
        VoxelGrid::new(&Rect::new(0.0, 0.0, 0.9, 0.6), 0.15).unwrap()
    }

    fn spike(n: usize, at: usize, v: f64) -> Image {
        let mut img = Image::zeros(n);
        img.values[at] = v;
        img
    }

    #[test]
    fn blank_uwb_image_is_empty_area() {
        let g = grid();
        let (img, est) = fuse_product(&spike(g.len(), 3, 5.0), &Image::zeros(g.len()), 0.05, &g, (0.0, 0.1)).unwrap();
        assert!(img.is_none());
        assert_eq!(est.status, EstimateStatus::EmptyArea);
        assert!(!est.is_valid());
    }

    #[test]
    fn coincident_spikes() {
        let g = grid();
        let (img, est) =
            fuse_product(&spike(g.len(), 17, 2.0), &spike(g.len(), 17, 1.0), 0.05, &g, (0.0, 0.1)).unwrap();
        assert_eq!(est.voxel, Some(17));
        assert_eq!(est.position, Some(g.center(17)));
        assert_eq!(est.t, 0.1);
        let img = img.unwrap();
        assert_eq!((img.rti_t, img.uwb_t, img.method), (0.0, 0.1, FusionMethod::Product));
        assert!((img.image.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn band_and_blob_meet_at_intersection() {
        // RTI: blob centered at (ix, iy) = (1, 2), falling off with distance.
        // UWB: band along column 4. Brute force: the product is maximal where
        // the band crosses the blob's row.
        let g = grid();
        let mut rti = Image::zeros(g.len());
        let mut uwb = Image::zeros(g.len());
        for n in 0..g.len() {
            let (ix, iy) = g.coords(n);
            let d2 = (ix as f64 - 1.0).powi(2) + (iy as f64 - 2.0).powi(2);
            rti.values[n] = (-0.1 * d2).exp();
            if ix == 4 {
                uwb.values[n] = 1.0;
            }
        }
        let (_, est) = fuse_product(&rti, &uwb, 0.05, &g, (0.0, 0.0)).unwrap();
        let mut best = (0, f64::MIN);
        for n in 0..g.len() {
            let v = rti.values[n] * uwb.values[n];
            if v > best.1 {
                best = (n, v);
            }
        }
        assert_eq!(est.voxel, Some(best.0));
        assert_eq!(g.coords(best.0), (4, 2));
    }

    #[test]
    fn flat_inputs_are_flagged_separately() {
        let g = grid();
        let flat = Image::new(vec![1.0; g.len()]);
        let (_, est) = fuse_product(&flat, &flat, 0.05, &g, (0.0, 0.0)).unwrap();
        assert_eq!(est.status, EstimateStatus::FlatImage);
        assert!(fuse_product(&flat, &Image::zeros(3), 0.05, &g, (0.0, 0.0)).is_err());
    }

    #[test]
    fn x_from_y_takes_column_from_uwb_row() {
        let g = grid();
        let rti = spike(g.len(), g.index(1, 3), 1.0);
        let mut uwb = Image::zeros(g.len());
        uwb.values[g.index(5, 3)] = 0.4;
        uwb.values[g.index(2, 3)] = 0.1;
        uwb.values[g.index(6, 1)] = 0.9;
        let est = fuse_x_from_y(&rti, &uwb, 0.05, &g, 1.0).unwrap();
        assert_eq!(est.voxel, Some(g.index(5, 3)));
        assert_eq!(est.status, EstimateStatus::Valid);
    }

    #[test]
    fn x_from_y_falls_back_on_blank_row() {
        let g = grid();
        let rti = spike(g.len(), g.index(2, 2), 1.0);
        let est = fuse_x_from_y(&rti, &Image::zeros(g.len()), 0.05, &g, 1.0).unwrap();
        assert_eq!(est.voxel, Some(g.index(2, 2)));
        assert_eq!(est.status, EstimateStatus::RowFallback);
        assert!(est.is_valid());
        let quiet = spike(g.len(), 0, 0.01);
        assert_eq!(fuse_x_from_y(&quiet, &rti, 0.05, &g, 1.0).unwrap().status, EstimateStatus::EmptyArea);
    }

    #[test]
    fn sync_rule() {
        assert_eq!(synchronize(&[0.0, 1.0], &[0.1, 0.5, 1.2]), vec![(0, 0), (0, 1), (1, 2)]);
        assert_eq!(synchronize(&[], &[0.1, 0.5]), vec![]);
        assert_eq!(synchronize(&[1.0], &[0.5, 1.0, 1.0]), vec![(0, 1), (0, 2)]);
    }

    fn joint_setup() -> (VoxelGrid, DMatrix<f64>, DelayMap, JointInversion) {
        let d = Deployment {
            room: Rect::new(0.0, 0.0, 1.5, 1.5),
            rss_nodes: (0..4)
                .flat_map(|i| [Point::new(-0.1, 0.2 + 0.35 * i as f64), Point::new(1.6, 0.2 + 0.35 * i as f64)])
                .collect(),
            uwb_tx: Point::new(-0.1, 0.5),
            uwb_rx: Point::new(-0.1, 1.0),
        };
        let g = VoxelGrid::new(&d.room, 0.15).unwrap();
        let links = LinkSet::all_pairs(&d.rss_nodes).unwrap();
        let w = compute_weight_matrix(&links, &g, 0.02).unwrap();
        let delays = DelayMap::new(&g, &d, 1.0, 2);
        let prior = PriorPrecision::new(&g, &RtiParams::default()).unwrap();
        let joint = JointInversion::new(&w, &delays, 20, &prior).unwrap();
        (g, w, delays, joint)
    }

    #[test]
    fn joint_zero_inputs_give_zero_image() {
        let (g, w, _, joint) = joint_setup();
        let img = joint.image(&vec![0.0; w.nrows()], &[0.0; 20]).unwrap();
        assert_eq!(img, Image::zeros(g.len()));
        assert!(joint.image(&vec![0.0; w.nrows()], &[0.0; 19]).is_err());
        assert!(joint.image(&[0.0], &[0.0; 20]).is_err());
    }

    #[test]
    fn uwb_columns_are_unit_steps() {
        let delays = DelayMap { bins: vec![2, 4, 9], los_bin: 0 };
        let w = uwb_weight_matrix(&delays, 5);
        assert_eq!(w.column(0).as_slice(), &[0.0, 0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(w.column(1).as_slice(), &[0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(w.column(2).sum(), 0.0);
    }

    proptest! {
        #[test]
        fn product_argmax_affine_invariant(
            r in proptest::collection::vec(0.0f64..1.0, 48),
            u in proptest::collection::vec(0.0f64..1.0, 48),
            a in 0.1f64..10.0, b in -5.0f64..5.0,
        ) {
            let g = grid();
            let ri = Image::new(r.clone());
            let ui = Image::new(u);
            let scaled = Image::new(r.iter().map(|v| a * v + b).collect());
            let x = product(&normalize(&ri).unwrap(), &normalize(&ui).unwrap());
            let y = product(&normalize(&scaled).unwrap(), &normalize(&ui).unwrap());
            prop_assert_eq!(x.argmax(), y.argmax());
            // via the full path with the threshold disabled
            let (_, e1) = fuse_product(&ri, &ui, f64::NEG_INFINITY, &g, (0.0, 0.0)).unwrap();
            let (_, e2) = fuse_product(&scaled, &ui, f64::NEG_INFINITY, &g, (0.0, 0.0)).unwrap();
            prop_assert_eq!(e1.voxel, e2.voxel);
        }

        #[test]
        fn product_is_symmetric(
            r in proptest::collection::vec(-1.0f64..1.0, 48),
            u in proptest::collection::vec(0.0f64..1.0, 48),
        ) {
            let g = grid();
            let (a, ea) = fuse_product(&Image::new(r.clone()), &Image::new(u.clone()), 0.0, &g, (0.0, 0.0)).unwrap();
            let (b, eb) = fuse_product(&Image::new(u), &Image::new(r), 0.0, &g, (0.0, 0.0)).unwrap();
            prop_assert_eq!(a.map(|c| c.image), b.map(|c| c.image));
            prop_assert_eq!(ea.voxel, eb.voxel);
        }

        #[test]
        fn x_from_y_keeps_rti_row(
            r in proptest::collection::vec(0.0f64..1.0, 48),
            u in proptest::collection::vec(0.0f64..1.0, 48),
        ) {
            let g = grid();
            let ri = Image::new(r);
            let base = locate(&ri, 0.05, &g, 0.0);
            let est = fuse_x_from_y(&ri, &Image::new(u), 0.05, &g, 0.0).unwrap();
            if let (Some(a), Some(b)) = (base.position, est.position) {
                prop_assert_eq!(a.y, b.y);
            }
        }

        #[test]
        fn sync_count(rti in proptest::collection::vec(0.0f64..10.0, 0..10),
                      uwb in proptest::collection::vec(0.0f64..10.0, 0..30)) {
            let mut rti = rti;
            let mut uwb = uwb;
            rti.sort_by(f64::total_cmp);
            uwb.sort_by(f64::total_cmp);
            let pairs = synchronize(&rti, &uwb);
            let expected = uwb.iter().filter(|&&t| rti.iter().any(|&r| r <= t)).count();
            prop_assert_eq!(pairs.len(), expected);
            for (r, u) in pairs {
                prop_assert!(rti[r] <= uwb[u]);
                prop_assert!(rti.get(r + 1).map_or(true, |&n| n > uwb[u]));
            }
        }
    }
}
