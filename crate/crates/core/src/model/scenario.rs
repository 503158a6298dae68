//! Scenario files: JSON schema, validation with field paths, and the
//! built-in presets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::channel::{ChannelModel, ChannelState, JointChannel};
use super::template::{DataUnitSpec, GopTemplate, SizePmf};
use crate::error::{Error, Result};

/// How a user sees the coordinator's per-joint-state prices when planning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PriceView {
    /// Plan against `E[lambda_i | h_i]` under the stationary channel law.
    #[default]
    Expected,
    /// The joint channel state is part of the user's state.
    Full,
}

#[derive(Debug, Clone)]
pub struct UserConfig {
    pub name: String,
    pub template: GopTemplate,
    pub channel: ChannelModel,
    /// Quality floor `D`.
    pub min_quality: f64,
    /// Energy tradeoff `beta`.
    pub tradeoff: f64,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub users: Vec<UserConfig>,
    pub bits_per_packet: f64,
    pub bandwidth: f64,
    pub discount: f64,
    pub price_tolerance: f64,
    pub horizon: usize,
    pub seed: u64,
    pub solver: Option<String>,
    pub price_view: PriceView,
}

impl Scenario {
    pub fn joint_channel(&self) -> JointChannel {
        let chans: Vec<&ChannelModel> = self.users.iter().map(|u| &u.channel).collect();
        JointChannel::new(&chans)
    }

    pub fn channels(&self) -> Vec<&ChannelModel> {
        self.users.iter().map(|u| &u.channel).collect()
    }

    /// Per-packet bandwidth of `user` in channel state `h`.
    pub fn packet_cost(&self, user: usize, h: usize) -> f64 {
        self.bits_per_packet / self.users[user].channel.rate(h)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: ScenarioFile = serde_json::from_str(text)?;
        raw.build()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    /// Named built-in scenarios.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "illustration-2user" => illustration_file().build(),
            "gop16-default" => gop16_default_file().build(),
            other => Err(Error::Usage(format!(
                "unknown preset {other:?} (known: illustration-2user, gop16-default)"
            ))),
        }
    }

    /// Loads `spec` as a preset name if it matches one, else as a file path.
    pub fn resolve(spec: &str) -> Result<Self> {
        if matches!(spec, "illustration-2user" | "gop16-default") {
            Self::preset(spec)
        } else {
            Self::load(spec)
        }
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            name: self.name.clone(),
            bits_per_packet: self.bits_per_packet,
            bandwidth: self.bandwidth,
            discount: self.discount,
            price_tolerance: self.price_tolerance,
            horizon: Some(self.horizon),
            seed: self.seed,
            solver: self.solver.clone(),
            price_view: self.price_view,
            users: self
                .users
                .iter()
                .map(|u| UserFile {
                    name: u.name.clone(),
                    min_quality: u.min_quality,
                    tradeoff: u.tradeoff,
                    gop: GopFile {
                        period: u.template.period(),
                        window: u.template.window(),
                        dus: u
                            .template
                            .dus()
                            .iter()
                            .map(|d| DuFile {
                                label: d.label.clone(),
                                distortion_impact: d.distortion_impact,
                                deadline_offset: d.deadline_offset,
                                size_pmf: d.size_pmf.support().to_vec(),
                                parents: d.parents.clone(),
                            })
                            .collect(),
                    },
                    channel: ChannelFile {
                        states: u
                            .channel
                            .states()
                            .iter()
                            .map(|s| StateFile {
                                name: s.name.clone(),
                                gain_to_noise: s.gain_to_noise,
                                rate: s.rate,
                            })
                            .collect(),
                        transition: u.channel.transition().to_vec(),
                    },
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }
}

/// On-disk scenario layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    #[serde(default = "one")]
    pub bits_per_packet: f64,
    #[serde(default = "one")]
    pub bandwidth: f64,
    pub discount: f64,
    #[serde(default = "default_tolerance")]
    pub price_tolerance: f64,
    /// Defaults to the number of slots until `discount^t < 1e-6`.
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: Option<String>,
    #[serde(default)]
    pub price_view: PriceView,
    pub users: Vec<UserFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserFile {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub min_quality: f64,
    pub tradeoff: f64,
    pub gop: GopFile,
    pub channel: ChannelFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GopFile {
    pub period: u32,
    pub window: u32,
    pub dus: Vec<DuFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DuFile {
    #[serde(default)]
    pub label: String,
    pub distortion_impact: f64,
    pub deadline_offset: u32,
    /// `(packets, probability)` pairs.
    pub size_pmf: Vec<(u32, f64)>,
    #[serde(default)]
    pub parents: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    pub states: Vec<StateFile>,
    pub transition: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    #[serde(default)]
    pub name: String,
    pub gain_to_noise: f64,
    pub rate: f64,
}

fn one() -> f64 {
    1.0
}

fn default_tolerance() -> f64 {
    1e-3
}

/// Slots until `delta^t` drops below 1e-6.
pub fn default_horizon(delta: f64) -> usize {
    if delta <= 0.0 {
        1
    } else {
        ((1e-6f64).ln() / delta.ln()).ceil().max(1.0) as usize
    }
}

fn prefixed(prefix: &str, err: Error) -> Error {
    match err {
        Error::Validation { field, reason } => Error::Validation {
            field: format!("{prefix}.{field}"),
            reason,
        },
        other => other,
    }
}

impl ScenarioFile {
    pub fn build(&self) -> Result<Scenario> {
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::validation("discount", format!("{} not in [0,1)", self.discount)));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::validation("bandwidth", "must be > 0"));
        }
        if !(self.bits_per_packet > 0.0 && self.bits_per_packet.is_finite()) {
            return Err(Error::validation("bits_per_packet", "must be > 0"));
        }
        if !(self.price_tolerance > 0.0) {
            return Err(Error::validation("price_tolerance", "must be > 0"));
        }
        if self.users.is_empty() {
            return Err(Error::validation("users", "no users"));
        }
        let mut users = Vec::with_capacity(self.users.len());
        for (i, u) in self.users.iter().enumerate() {
            users.push(u.build().map_err(|e| prefixed(&format!("users[{i}]"), e))?);
        }
        Ok(Scenario {
            name: self.name.clone(),
            users,
            bits_per_packet: self.bits_per_packet,
            bandwidth: self.bandwidth,
            discount: self.discount,
            price_tolerance: self.price_tolerance,
            horizon: self.horizon.unwrap_or_else(|| default_horizon(self.discount)),
            seed: self.seed,
            solver: self.solver.clone(),
            price_view: self.price_view,
        })
    }
}

impl UserFile {
    fn build(&self) -> Result<UserConfig> {
        if !(self.min_quality >= 0.0 && self.min_quality.is_finite()) {
            return Err(Error::validation("min_quality", "must be >= 0"));
        }
        if !(self.tradeoff >= 0.0 && self.tradeoff.is_finite()) {
            return Err(Error::validation("tradeoff", "must be >= 0"));
        }
        let mut dus = Vec::with_capacity(self.gop.dus.len());
        for (n, d) in self.gop.dus.iter().enumerate() {
            let pmf = SizePmf::new(d.size_pmf.iter().copied())
                .map_err(|r| Error::validation(format!("gop.dus[{n}].size_pmf"), r))?;
            dus.push(DataUnitSpec {
                id: n,
                label: if d.label.is_empty() { format!("DU{n}") } else { d.label.clone() },
                distortion_impact: d.distortion_impact,
                deadline_offset: d.deadline_offset,
                size_pmf: pmf,
                parents: d.parents.clone(),
            });
        }
        let template = GopTemplate::new(dus, self.gop.period, self.gop.window).map_err(|e| prefixed("gop", e))?;
        let states = self
            .channel
            .states
            .iter()
            .enumerate()
            .map(|(h, s)| ChannelState {
                name: if s.name.is_empty() { format!("h{h}") } else { s.name.clone() },
                gain_to_noise: s.gain_to_noise,
                rate: s.rate,
            })
            .collect();
        let channel =
            ChannelModel::new(states, self.channel.transition.clone()).map_err(|e| prefixed("channel", e))?;
        Ok(UserConfig {
            name: self.name.clone(),
            template,
            channel,
            min_quality: self.min_quality,
            tradeoff: self.tradeoff,
        })
    }
}

fn du(label: &str, q: f64, d: u32, pmf: Vec<(u32, f64)>, parents: &[usize]) -> DuFile {
    DuFile {
        label: label.into(),
        distortion_impact: q,
        deadline_offset: d,
        size_pmf: pmf,
        parents: parents.to_vec(),
    }
}

fn good_bad(good: f64, bad: f64, p: [[f64; 2]; 2]) -> ChannelFile {
    ChannelFile {
        states: vec![
            StateFile { name: "good".into(), gain_to_noise: 1.4, rate: good },
            StateFile { name: "bad".into(), gain_to_noise: 1.4, rate: bad },
        ],
        transition: p.iter().map(|r| r.to_vec()).collect(),
    }
}

/// Two users, IPB and IPP GOPs with 40/10/10 packet frames, 60 or 40
/// packets per slot.
pub fn illustration_file() -> ScenarioFile {
    let chain = [[0.7, 0.3], [0.3, 0.7]];
    let (qi, qp) = (0.1, 0.02);
    ScenarioFile {
        name: "illustration-2user".into(),
        bits_per_packet: 1.0,
        bandwidth: 1.0,
        discount: 0.95,
        price_tolerance: 1e-3,
        horizon: None,
        seed: 1,
        solver: Some("proposed".into()),
        price_view: PriceView::Expected,
        users: vec![
            UserFile {
                name: "user1".into(),
                min_quality: 0.0,
                tradeoff: 0.0,
                gop: GopFile {
                    period: 2,
                    window: 2,
                    dus: vec![
                        du("I", qi, 0, vec![(40, 1.0)], &[]),
                        du("P", qp, 1, vec![(10, 1.0)], &[0]),
                        du("B", qp, 1, vec![(10, 1.0)], &[0, 1]),
                    ],
                },
                channel: good_bad(60.0, 40.0, chain),
            },
            UserFile {
                name: "user2".into(),
                min_quality: 0.0,
                tradeoff: 0.0,
                gop: GopFile {
                    period: 3,
                    window: 2,
                    dus: vec![
                        du("I", qi, 0, vec![(40, 1.0)], &[]),
                        du("P", qp, 1, vec![(10, 1.0)], &[0]),
                        du("P", qp, 2, vec![(10, 1.0)], &[1]),
                    ],
                },
                channel: good_bad(60.0, 40.0, chain),
            },
        ],
    }
}

/// Sixteen-frame GOP per user at desk scale: one frame per slot, a three
/// slot window and small random frame sizes.
pub fn gop16_default_file() -> ScenarioFile {
    let pattern = "IBPBPBPBPBPBPBPB";
    let mut dus = Vec::new();
    let mut last_ref = 0usize;
    for (n, c) in pattern.chars().enumerate() {
        let (q, pmf, parents) = match c {
            'I' => (1.0, vec![(2, 0.5), (3, 0.5)], vec![]),
            'P' => {
                let p = vec![last_ref];
                (0.6, vec![(1, 0.5), (2, 0.5)], p)
            }
            _ => (0.3, vec![(0, 0.3), (1, 0.7)], vec![last_ref]),
        };
        dus.push(du(&c.to_string(), q, n as u32, pmf, &parents));
        if c != 'B' {
            last_ref = n;
        }
    }
    // B frames reference the previous anchor only; a P reference must
    // co-occur with its parent, which holds for the two-slot spacing and W=3.
    let user = |name: &str| UserFile {
        name: name.into(),
        min_quality: 0.0,
        tradeoff: 1.0,
        gop: GopFile {
            period: 16,
            window: 3,
            dus: dus.clone(),
        },
        channel: good_bad(4.0, 2.0, [[0.7, 0.3], [0.4, 0.6]]),
    };
    ScenarioFile {
        name: "gop16-default".into(),
        bits_per_packet: 1.0,
        bandwidth: 1.0,
        discount: 0.95,
        price_tolerance: 1e-3,
        horizon: None,
        seed: 1,
        solver: Some("proposed".into()),
        price_view: PriceView::Expected,
        users: vec![user("user1"), user("user2")],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_load() {
        let s = Scenario::preset("gop16-default").unwrap();
        assert_eq!(s.discount, 0.95);
        assert_eq!(s.users[0].tradeoff, 1.0);
        assert_eq!(s.users[0].template.dus().len(), 16);
        assert_eq!(s.users[0].channel.gain_to_noise(0), 1.4);
        assert_eq!(s.horizon, default_horizon(0.95));

        let s = Scenario::preset("illustration-2user").unwrap();
        let sizes: Vec<u32> = s.users[0].template.dus().iter().map(|d| d.size_pmf.max()).collect();
        assert_eq!(sizes, vec![40, 10, 10]);
        assert_eq!(s.users[1].template.period(), 3);
        assert_eq!(s.users[0].channel.rate(0), 60.0);
        assert_eq!(s.users[0].channel.rate(1), 40.0);
    }

    #[test]
    fn horizon_matches_precision() {
        let h = default_horizon(0.95);
        assert!(0.95f64.powi(h as i32) < 1e-6);
        assert!(0.95f64.powi(h as i32 - 1) >= 1e-6);
        assert_eq!(h, 270);
    }

    #[test]
    fn cycle_error_names_field() {
        let mut f = illustration_file();
        f.users[1].gop.dus[0].parents = vec![2];
        let err = f.build().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("users[1].gop"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn bad_row_names_field() {
        let mut f = illustration_file();
        f.users[0].channel.transition[1] = vec![0.5, 0.6];
        let msg = f.build().unwrap_err().to_string();
        assert!(msg.contains("users[0].channel.transition[1]"), "{msg}");
    }

    #[test]
    fn json_round_trip() {
        let s = Scenario::preset("illustration-2user").unwrap();
        let back = Scenario::from_json_str(&s.to_json()).unwrap();
        assert_eq!(back.users[1].template, s.users[1].template);
        assert_eq!(back.users[0].channel, s.users[0].channel);
        assert_eq!(back.discount, s.discount);
    }

    #[test]
    fn malformed_json_is_a_validation_failure() {
        let err = Scenario::from_json_str("{\"discount\": 0.9}").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = Scenario::from_json_str("{\"discount\": 1.0, \"users\": []}").unwrap_err();
        assert!(err.to_string().contains("discount"));
    }
}
