//! Gated track maintenance with m-of-n confirmation.
//!
//! Every formed combined image is one tracker frame. A valid estimate updates
//! the closest confirmed track inside the gate, else the closest candidate
//! inside the gate, else starts a new candidate. A candidate is confirmed once
//! `h_app` of its frames are updates within its first `window` frames, and
//! dropped as soon as that can no longer happen. Confirmed tracks are kept
//! and marked stale after `window` frames without an update.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::PositionEstimate;
use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerParams {
    /// Updates needed for confirmation.
    pub h_app: usize,
    /// Confirmation window `H`, in frames.
    pub window: usize,
    /// Gating radius `omega` in meters.
    pub gate_radius: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self { h_app: 8, window: 15, gate_radius: 1.2 }
    }
}

impl TrackerParams {
    pub fn validate(&self) -> Result<()> {
        if self.h_app == 0 || self.h_app > self.window {
            return Err(Error::Params(format!("need 1 <= h_app ({}) <= window ({})", self.h_app, self.window)));
        }
        if !(self.gate_radius > 0.0) {
            return Err(Error::Params("gate radius must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrackState {
    Candidate,
    Confirmed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub state: TrackState,
    pub position: Point,
    /// Update flags of the most recent frames, newest last, at most `window` long.
    pub history: VecDeque<bool>,
    /// Frames seen since creation, the creating frame included.
    pub age: usize,
    pub last_update: f64,
    pub frames_since_update: usize,
}

impl Track {
    fn updates(&self) -> usize {
        self.history.iter().filter(|&&u| u).count()
    }

    pub fn is_stale(&self, window: usize) -> bool {
        self.frames_since_update >= window
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrackEventKind {
    Created,
    Updated,
    Confirmed,
    Deleted,
    Stale,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackEvent {
    pub t: f64,
    pub track: u64,
    pub kind: TrackEventKind,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone)]
pub struct Tracker {
    pub params: TrackerParams,
    /// Candidates and confirmed tracks, oldest first.
    pub tracks: Vec<Track>,
    next_id: u64,
}

impl Tracker {
    pub fn new(params: TrackerParams) -> Self {
        Self { params, tracks: Vec::new(), next_id: 0 }
    }

    pub fn candidates(&self) -> impl Iterator<Item = &Track> {
        self.tracks.iter().filter(|t| t.state == TrackState::Candidate)
    }

    pub fn confirmed(&self) -> impl Iterator<Item = &Track> {
        self.tracks.iter().filter(|t| t.state == TrackState::Confirmed)
    }

    /// Advances one frame. Invalid estimates only age the tracks.
    pub fn update(&mut self, estimate: &PositionEstimate) -> Vec<TrackEvent> {
        let mut events = Vec::new();
        let t = estimate.t;
        let target = estimate.position.and_then(|p| self.associate(&p).map(|i| (i, p)));

        // push this frame's flag to every existing track
        for (i, track) in self.tracks.iter_mut().enumerate() {
            let hit = target.is_some_and(|(j, _)| j == Some(i));
            if track.history.len() == self.params.window {
                track.history.pop_front();
            }
            track.history.push_back(hit);
            track.age += 1;
            if hit {
                let p = target.unwrap().1;
                track.position = p;
                track.last_update = t;
                track.frames_since_update = 0;
                events.push(TrackEvent { t, track: track.id, kind: TrackEventKind::Updated, x: p.x, y: p.y });
            } else {
                track.frames_since_update += 1;
                if track.state == TrackState::Confirmed && track.frames_since_update == self.params.window {
                    let p = track.position;
                    events.push(TrackEvent { t, track: track.id, kind: TrackEventKind::Stale, x: p.x, y: p.y });
                }
            }
        }

        if let Some((None, p)) = target {
            let id = self.next_id;
            self.next_id += 1;
            self.tracks.push(Track {
                id,
                state: TrackState::Candidate,
                position: p,
                history: VecDeque::from([true]),
                age: 1,
                last_update: t,
                frames_since_update: 0,
            });
            events.push(TrackEvent { t, track: id, kind: TrackEventKind::Created, x: p.x, y: p.y });
        }

        let (h_app, window) = (self.params.h_app, self.params.window);
        self.tracks.retain_mut(|track| {
            if track.state != TrackState::Candidate {
                return true;
            }
            let p = track.position;
            if track.updates() >= h_app && track.age <= window {
                track.state = TrackState::Confirmed;
                events.push(TrackEvent { t, track: track.id, kind: TrackEventKind::Confirmed, x: p.x, y: p.y });
                return true;
            }
            let remaining = window.saturating_sub(track.age);
            if track.updates() + remaining < h_app {
                events.push(TrackEvent { t, track: track.id, kind: TrackEventKind::Deleted, x: p.x, y: p.y });
                return false;
            }
            true
        });
        events
    }

    /// Index of the track to update with an estimate at `p`: `Some(None)`
    /// starts a new candidate. Distance ties go to the older track.
    fn associate(&self, p: &Point) -> Option<Option<usize>> {
        if self.tracks.is_empty() {
            return Some(None);
        }
        let closest = |state: TrackState| {
            self.tracks
                .iter()
                .enumerate()
                .filter(|(_, t)| t.state == state)
                .map(|(i, t)| (i, t.position.dist(p)))
                .filter(|&(_, d)| d <= self.params.gate_radius)
                .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                    Some((_, bd)) if bd <= d => best,
                    _ => Some((i, d)),
                })
                .map(|(i, _)| i)
        };
        Some(closest(TrackState::Confirmed).or_else(|| closest(TrackState::Candidate)))
    }

    /// Position of the most recently updated confirmed track.
    pub fn current_position(&self) -> Option<Point> {
        self.confirmed()
            .fold(None, |best: Option<&Track>, t| match best {
                Some(b) if b.last_update >= t.last_update => Some(b),
                _ => Some(t),
            })
            .map(|t| t.position)
    }
}
