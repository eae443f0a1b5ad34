//! Run statistics and user-perceived throughput.

use crate::output::{fmt_num, fmt_opt};
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Technology {
    #[serde(rename = "MF")]
    Mf,
    #[serde(rename = "WIFI")]
    Wifi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Direction {
    #[serde(rename = "UL")]
    Ul,
    #[serde(rename = "DL")]
    Dl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeClass {
    Ue,
    Enb,
    WifiSta,
    WifiAp,
}

impl NodeClass {
    pub const ALL: [NodeClass; 4] = [NodeClass::Ue, NodeClass::Enb, NodeClass::WifiSta, NodeClass::WifiAp];

    pub fn technology(self) -> Technology {
        match self {
            NodeClass::Ue | NodeClass::Enb => Technology::Mf,
            NodeClass::WifiSta | NodeClass::WifiAp => Technology::Wifi,
        }
    }

    /// Direction of the data this class sends.
    pub fn direction(self) -> Direction {
        match self {
            NodeClass::Ue | NodeClass::WifiSta => Direction::Ul,
            NodeClass::Enb | NodeClass::WifiAp => Direction::Dl,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeClass::Ue => "ue",
            NodeClass::Enb => "enb",
            NodeClass::WifiSta => "wifi_sta",
            NodeClass::WifiAp => "wifi_ap",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassStats {
    pub access_attempts: u64,
    pub access_successes: u64,
    pub collisions: u64,
    pub wasted_grants: u64,
    pub units_sent: u64,
    pub units_collided: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileRecord {
    pub id: u64,
    pub technology: Technology,
    pub direction: Direction,
    /// Node holding the data at arrival (sender).
    pub node: usize,
    pub size_bits: u64,
    pub arrival_s: f64,
    pub completion_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub mean_upt_ul_mf: Option<f64>,
    pub mean_upt_dl_mf: Option<f64>,
    pub mean_upt_ul_wifi: Option<f64>,
    pub mean_upt_dl_wifi: Option<f64>,
    pub per_class: BTreeMap<NodeClass, ClassStats>,
    pub files: Vec<FileRecord>,
    pub simulated_s: f64,
    pub airtime_s: f64,
    pub bits_generated: u64,
    pub bits_delivered: u64,
}

/// Mean UPT in Mbps per (technology, direction) over completed files.
pub fn compute_upt(records: &[FileRecord]) -> BTreeMap<(Technology, Direction), Option<f64>> {
    let mut acc: BTreeMap<(Technology, Direction), (f64, u64)> = BTreeMap::new();
    for tech in [Technology::Mf, Technology::Wifi] {
        for dir in [Direction::Ul, Direction::Dl] {
            acc.insert((tech, dir), (0.0, 0));
        }
    }
    for r in records {
        let Some(done) = r.completion_s else { continue };
        let dt = done - r.arrival_s;
        if dt <= 0.0 {
            continue;
        }
        let e = acc.get_mut(&(r.technology, r.direction)).expect("all keys present");
        e.0 += r.size_bits as f64 / dt / 1e6;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, if n == 0 { None } else { Some(s / n as f64) })).collect()
}

impl RunMetrics {
    pub fn from_parts(
        per_class: BTreeMap<NodeClass, ClassStats>,
        files: Vec<FileRecord>,
        simulated_s: f64,
        airtime_s: f64,
        bits_generated: u64,
        bits_delivered: u64,
    ) -> Self {
        let upt = compute_upt(&files);
        Self {
            mean_upt_ul_mf: upt[&(Technology::Mf, Direction::Ul)],
            mean_upt_dl_mf: upt[&(Technology::Mf, Direction::Dl)],
            mean_upt_ul_wifi: upt[&(Technology::Wifi, Direction::Ul)],
            mean_upt_dl_wifi: upt[&(Technology::Wifi, Direction::Dl)],
            per_class,
            files,
            simulated_s,
            airtime_s,
            bits_generated,
            bits_delivered,
        }
    }

    pub fn upt(&self, tech: Technology, dir: Direction) -> Option<f64> {
        match (tech, dir) {
            (Technology::Mf, Direction::Ul) => self.mean_upt_ul_mf,
            (Technology::Mf, Direction::Dl) => self.mean_upt_dl_mf,
            (Technology::Wifi, Direction::Ul) => self.mean_upt_ul_wifi,
            (Technology::Wifi, Direction::Dl) => self.mean_upt_dl_wifi,
        }
    }

    /// Mean UPT over every completed file of one technology.
    pub fn mean_upt_technology(&self, tech: Technology) -> Option<f64> {
        let v: Vec<f64> = self
            .files
            .iter()
            .filter(|f| f.technology == tech)
            .filter_map(|f| f.completion_s.map(|c| f.size_bits as f64 / (c - f.arrival_s) / 1e6))
            .collect();
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    }

    pub fn stats(&self, class: NodeClass) -> ClassStats {
        self.per_class.get(&class).copied().unwrap_or_default()
    }

    pub const CSV_HEADER: &'static str = "technology,direction,node_class,mean_upt_mbps,files_completed,files_in_flight,access_attempts,access_successes,collisions,wasted_grants";

    /// One row per (technology, direction).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for class in NodeClass::ALL {
            let (tech, dir) = (class.technology(), class.direction());
            let files = self.files.iter().filter(|f| f.technology == tech && f.direction == dir);
            let (done, open) = files.fold((0u64, 0u64), |(d, o), f| {
                if f.completion_s.is_some() {
                    (d + 1, o)
                } else {
                    (d, o + 1)
                }
            });
            let s = self.stats(class);
            let t = match tech {
                Technology::Mf => "MF",
                Technology::Wifi => "WIFI",
            };
            let d = match dir {
                Direction::Ul => "UL",
                Direction::Dl => "DL",
            };
            out.push_str(&format!(
                "{t},{d},{},{},{done},{open},{},{},{},{}\n",
                class.name(),
                fmt_opt(self.upt(tech, dir)),
                s.access_attempts,
                s.access_successes,
                s.collisions,
                s.wasted_grants
            ));
        }
        out
    }

    /// Compact JSON-friendly summary (no per-file records).
    pub fn summary(&self) -> serde_json::Value {
        let classes: serde_json::Map<String, serde_json::Value> = self
            .per_class
            .iter()
            .map(|(c, s)| (c.name().to_string(), serde_json::to_value(s).expect("plain struct")))
            .collect();
        let completed = self.files.iter().filter(|f| f.completion_s.is_some()).count();
        serde_json::json!({
            "mean_upt_ul_mf": self.mean_upt_ul_mf,
            "mean_upt_dl_mf": self.mean_upt_dl_mf,
            "mean_upt_ul_wifi": self.mean_upt_ul_wifi,
            "mean_upt_dl_wifi": self.mean_upt_dl_wifi,
            "per_class": classes,
            "files_generated": self.files.len(),
            "files_completed": completed,
            "simulated_s": fmt_num(self.simulated_s),
            "airtime_s": fmt_num(self.airtime_s),
            "bits_generated": self.bits_generated,
            "bits_delivered": self.bits_delivered,
        })
    }
}
