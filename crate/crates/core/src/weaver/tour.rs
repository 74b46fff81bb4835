use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::spec::MobileAppSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TourMode {
    NotStarted,
    OnTrack,
    WrongPiece,
    Complete,
}

impl TourMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TourMode::NotStarted => "not_started",
            TourMode::OnTrack => "on_track",
            TourMode::WrongPiece => "wrong_piece",
            TourMode::Complete => "complete",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TourStop {
    pub id: String,
    pub name: String,
    pub target_url: String,
}

/// Mobile hypermedia tour: which piece comes next and whether the visitor
/// is where they should be.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TourState {
    pub stops: Vec<TourStop>,
    pub expected_index: usize,
    pub visited: BTreeSet<String>,
    pub mode: TourMode,
    pub last_sensed: Option<String>,
}

/// Tour order from the link chain, or from `order` fields when there are no
/// links. Errors carry a message key.
pub fn tour_order(spec: &MobileAppSpec) -> Result<Vec<String>, &'static str> {
    let space = &spec.space;
    if space.links.is_empty() {
        let mut ordered: Vec<(u32, &str)> =
            space.pois.iter().filter_map(|p| p.order.map(|o| (o, p.id.as_str()))).collect();
        ordered.sort();
        return Ok(ordered.into_iter().map(|(_, id)| id.to_string()).collect());
    }
    let mut next: HashMap<&str, &str> = HashMap::new();
    let mut has_inbound: BTreeSet<&str> = BTreeSet::new();
    for l in &space.links {
        if next.insert(&l.from, &l.to).is_some() || !has_inbound.insert(&l.to) {
            return Err("links.not-a-chain");
        }
    }
    let roots: Vec<&str> = space
        .pois
        .iter()
        .map(|p| p.id.as_str())
        .filter(|id| next.contains_key(id) && !has_inbound.contains(id))
        .collect();
    let [root] = roots[..] else {
        return Err(if roots.is_empty() { "link.cycle" } else { "links.not-a-chain" });
    };
    let mut out = vec![root.to_string()];
    let mut cur = root;
    while let Some(n) = next.get(cur) {
        if out.len() > space.links.len() {
            return Err("link.cycle");
        }
        out.push(n.to_string());
        cur = n;
    }
    if out.len() != space.links.len() + 1 {
        // Some links lie on a cycle detached from the chain.
        return Err("link.cycle");
    }
    Ok(out)
}

impl TourState {
    pub fn from_spec(spec: &MobileAppSpec) -> Result<Self, &'static str> {
        let stops = tour_order(spec)?
            .into_iter()
            .filter_map(|id| spec.poi(&id))
            .map(|p| TourStop { id: p.id.clone(), name: p.name.clone(), target_url: p.target_url.clone() })
            .collect();
        Ok(TourState {
            stops,
            expected_index: 0,
            visited: BTreeSet::new(),
            mode: TourMode::NotStarted,
            last_sensed: None,
        })
    }

    pub fn ordered_ids(&self) -> Vec<&str> {
        self.stops.iter().map(|s| s.id.as_str()).collect()
    }

    pub fn expected(&self) -> Option<&TourStop> {
        self.stops.get(self.expected_index)
    }

    pub fn stop(&self, id: &str) -> Option<&TourStop> {
        self.stops.iter().find(|s| s.id == id)
    }

    /// Records that the visitor is at `poi`. A finished tour stays finished;
    /// specs without a tour never change state.
    pub fn sense(&mut self, poi: &str) {
        if self.stops.is_empty() || self.mode == TourMode::Complete {
            return;
        }
        self.last_sensed = Some(poi.to_string());
        if self.expected().is_some_and(|s| s.id == poi) {
            self.visited.insert(poi.to_string());
            self.expected_index += 1;
            self.mode = if self.expected_index == self.stops.len() {
                TourMode::Complete
            } else {
                TourMode::OnTrack
            };
        } else {
            self.mode = TourMode::WrongPiece;
        }
    }
}
