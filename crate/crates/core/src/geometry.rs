//! Planar deployment geometry: room bounds, sensor positions, the voxel grid
//! shared by both images, the RSS link set and bistatic delay bins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Propagation speed in meters per nanosecond.
pub const SPEED_OF_LIGHT_M_PER_NS: f64 = 0.299_792_458;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Axis-aligned rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self { x_min, y_min, x_max, y_max }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }
}

/// Room, RSS sensor positions and the single UWB transmitter/receiver pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Deployment {
    pub room: Rect,
    pub rss_nodes: Vec<Point>,
    pub uwb_tx: Point,
    pub uwb_rx: Point,
}

impl Deployment {
    pub fn validate(&self) -> Result<()> {
        let r = &self.room;
        if ![r.x_min, r.y_min, r.x_max, r.y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::Geometry("room bounds must be finite".into()));
        }
        if r.width() <= 0.0 || r.height() <= 0.0 {
            return Err(Error::Geometry(format!("room bounds have zero area ({} x {})", r.width(), r.height())));
        }
        if self.rss_nodes.len() < 2 {
            return Err(Error::Geometry(format!("need at least 2 RSS nodes, got {}", self.rss_nodes.len())));
        }
        if let Some(i) = self.rss_nodes.iter().position(|p| !p.is_finite()) {
            return Err(Error::Geometry(format!("RSS node {i} has a non-finite position")));
        }
        if !self.uwb_tx.is_finite() || !self.uwb_rx.is_finite() {
            return Err(Error::Geometry("UWB radio position is not finite".into()));
        }
        if self.uwb_tx == self.uwb_rx {
            return Err(Error::Geometry("UWB transmitter and receiver coincide".into()));
        }
        Ok(())
    }

    /// Splits the RSS nodes into the two sensor sides: nodes left of the room
    /// center line (side 0) and the rest (side 1).
    pub fn sides(&self) -> [Vec<usize>; 2] {
        let cx = self.room.center().x;
        let mut sides = [Vec::new(), Vec::new()];
        for (i, p) in self.rss_nodes.iter().enumerate() {
            sides[usize::from(p.x >= cx)].push(i);
        }
        sides
    }

    /// Same deployment shifted by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let mv = |p: &Point| Point::new(p.x + dx, p.y + dy);
        Self {
            room: Rect::new(self.room.x_min + dx, self.room.y_min + dy, self.room.x_max + dx, self.room.y_max + dy),
            rss_nodes: self.rss_nodes.iter().map(mv).collect(),
            uwb_tx: mv(&self.uwb_tx),
            uwb_rx: mv(&self.uwb_rx),
        }
    }
}

/// Square voxel discretization of the room plus a one-voxel ring on every edge.
/// Voxel `n` sits at column `ix = n % nx`, row `iy = n / nx`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    /// Lower-left corner of voxel (0, 0).
    pub origin: Point,
    pub voxel_width: f64,
    pub nx: usize,
    pub ny: usize,
}

// Guards ceil() against quotients like 3.0 / 0.15 = 20.000000000000004.
const CEIL_SLACK: f64 = 1e-9;

impl VoxelGrid {
    pub fn new(room: &Rect, voxel_width: f64) -> Result<Self> {
        if !(voxel_width > 0.0) || !voxel_width.is_finite() {
            return Err(Error::Geometry(format!("voxel width must be positive, got {voxel_width}")));
        }
        if !(room.width() > 0.0) || !(room.height() > 0.0) {
            return Err(Error::Geometry("room bounds have zero area".into()));
        }
        let cells = |len: f64| ((len / voxel_width) - CEIL_SLACK).ceil().max(1.0) as usize;
        Ok(Self {
            origin: Point::new(room.x_min - voxel_width, room.y_min - voxel_width),
            voxel_width,
            nx: cells(room.width()) + 2,
            ny: cells(room.height()) + 2,
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix < self.nx && iy < self.ny);
        iy * self.nx + ix
    }

    pub fn coords(&self, n: usize) -> (usize, usize) {
        (n % self.nx, n / self.nx)
    }

    pub fn center(&self, n: usize) -> Point {
        let (ix, iy) = self.coords(n);
        Point::new(
            self.origin.x + (ix as f64 + 0.5) * self.voxel_width,
            self.origin.y + (iy as f64 + 0.5) * self.voxel_width,
        )
    }

    pub fn centers(&self) -> Vec<Point> {
        (0..self.len()).map(|n| self.center(n)).collect()
    }

    /// Voxel containing `p`, clamped onto the grid.
    pub fn voxel_of(&self, p: &Point) -> usize {
        let clamp = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        let ix = clamp((p.x - self.origin.x) / self.voxel_width, self.nx);
        let iy = clamp((p.y - self.origin.y) / self.voxel_width, self.ny);
        self.index(ix, iy)
    }

    /// Row index whose voxel centers are closest to ordinate `y`.
    pub fn row_of(&self, y: f64) -> usize {
        self.coords(self.voxel_of(&Point::new(self.origin.x, y))).1
    }

    pub fn diagonal(&self) -> f64 {
        self.voxel_width * std::f64::consts::SQRT_2
    }
}

/// A directed RSS link between two nodes of the deployment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub tx: usize,
    pub rx: usize,
    pub tx_pos: Point,
    pub rx_pos: Point,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSet {
    pub links: Vec<Link>,
}

impl LinkSet {
    /// Every unordered pair `(i, j)`, `i < j`, in lexicographic order.
    pub fn all_pairs(nodes: &[Point]) -> Result<Self> {
        let pairs: Vec<_> = (0..nodes.len()).flat_map(|i| (i + 1..nodes.len()).map(move |j| (i, j))).collect();
        Self::from_pairs(nodes, &pairs)
    }

    pub fn from_pairs(nodes: &[Point], pairs: &[(usize, usize)]) -> Result<Self> {
        let mut links = Vec::with_capacity(pairs.len());
        for &(tx, rx) in pairs {
            if tx == rx {
                return Err(Error::Geometry(format!("self-link on node {tx}")));
            }
            let (tx_pos, rx_pos) = match (nodes.get(tx), nodes.get(rx)) {
                (Some(a), Some(b)) => (*a, *b),
                _ => return Err(Error::Geometry(format!("link ({tx}, {rx}) references a missing node"))),
            };
            let length = tx_pos.dist(&rx_pos);
            if !(length > 0.0) {
                return Err(Error::Geometry(format!("link ({tx}, {rx}) has zero length")));
            }
            links.push(Link { tx, rx, tx_pos, rx_pos, length });
        }
        Ok(Self { links })
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }
}

/// Path length tx -> p -> rx in excess of the direct tx -> rx path. Never negative.
pub fn excess_path(p: &Point, tx: &Point, rx: &Point) -> f64 {
    (p.dist(tx) + p.dist(rx) - tx.dist(rx)).max(0.0)
}

/// Delay bin of the echo from `p`, counted from the line-of-sight bin `los_bin`.
/// Fractional bins round half-up.
pub fn delay_bin_of(p: &Point, tx: &Point, rx: &Point, sampling_period_ns: f64, los_bin: usize) -> usize {
    let bins = excess_path(p, tx, rx) / (SPEED_OF_LIGHT_M_PER_NS * sampling_period_ns);
    los_bin + (bins + 0.5).floor() as usize
}

pub fn bistatic_delay_bin(
    grid: &VoxelGrid,
    deployment: &Deployment,
    voxel: usize,
    sampling_period_ns: f64,
    los_bin: usize,
) -> usize {
    delay_bin_of(&grid.center(voxel), &deployment.uwb_tx, &deployment.uwb_rx, sampling_period_ns, los_bin)
}

/// Delay bin `k_n` for every voxel of the grid.
pub fn delay_map(grid: &VoxelGrid, deployment: &Deployment, sampling_period_ns: f64, los_bin: usize) -> Vec<usize> {
    (0..grid.len()).map(|n| bistatic_delay_bin(grid, deployment, n, sampling_period_ns, los_bin)).collect()
}
