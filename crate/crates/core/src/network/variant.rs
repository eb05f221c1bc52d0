use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SubNetworkConfig;
use crate::error::{Error, Result};
use crate::kinematics::NUM_DOFS;
use crate::signal::{WindowLayout, GRID_COLUMNS, GRID_ROWS};

/// Network topology family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// 24 independent sub-networks, one per joint.
    PerJoint,
    /// One network with 24 outputs and sub-network widths (`I`).
    Single,
    /// One network with 24 outputs and five-fold widths (`W`).
    Wide,
}

/// EMG hidden widths selected by the `E-1` … `E-5` codes.
pub const WIDTH_CODES: [usize; 5] = [384, 307, 256, 219, 192];

/// Signal lengths of the input-length sweep, longest first.
pub const LENGTH_GRID_S: [f64; 8] = [0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1];

/// Envelope rate the length codes are converted at.
const ENVELOPE_RATE_HZ: f64 = 81.92;

/// Electrode subset codes: row subsets, then column subsets.
pub const ELECTRODE_CODES: [&str; 18] = [
    "A1", "A2", "A3", "B1", "B2", "B3", "C1", "C2", "C3", "C4", "C5", "C6", "D1", "D2", "F1", "F2", "F3", "F4",
];

/// Grid rows (1-based) or columns (1-based) kept by an electrode code.
fn electrode_selection(code: &str) -> Option<(Vec<usize>, Vec<usize>)> {
    let all_rows: Vec<usize> = (1..=GRID_ROWS).collect();
    let all_cols: Vec<usize> = (1..=GRID_COLUMNS).collect();
    let rows = |r: &[usize]| Some((r.to_vec(), all_cols.clone()));
    let cols = |c: Vec<usize>| Some((all_rows.clone(), c));
    match code {
        "A1" => rows(&[1, 2, 3, 4]),
        "A2" => rows(&[1, 2, 5, 6]),
        "A3" => rows(&[3, 4, 5, 6]),
        "B1" => rows(&[1, 2]),
        "B2" => rows(&[3, 4]),
        "B3" => rows(&[5, 6]),
        "C1" | "C2" | "C3" | "C4" | "C5" | "C6" => rows(&[code[1..].parse().ok()?]),
        "D1" => cols((2..=GRID_COLUMNS).step_by(2).collect()),
        "D2" => cols((1..=GRID_COLUMNS).step_by(2).collect()),
        "F1" | "F2" | "F3" | "F4" => {
            let first: usize = code[1..].parse().ok()?;
            cols((first..=GRID_COLUMNS).step_by(4).collect())
        }
        _ => None,
    }
}

/// Recorded channel indices of an electrode subset. Channel `c` sits at
/// grid row `c / 16 + 1`, column `c % 16 + 1`.
pub fn electrode_channels(code: &str) -> Result<Vec<usize>> {
    let (rows, cols) = electrode_selection(code).ok_or_else(|| Error::Config(format!("unknown electrode code {code:?}")))?;
    Ok(rows.iter().flat_map(|r| cols.iter().map(move |c| (r - 1) * GRID_COLUMNS + (c - 1))).collect())
}

/// A network variant: topology family plus any input or width changes.
///
/// Written as `+`-joined codes, e.g. `full`, `B`, `I-B`, `W`, `E-3`,
/// `B+E-3`, `B1`, `emg-0.4`, `angle-0.2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub family: Family,
    pub angle_branch: bool,
    /// Width code index into [`WIDTH_CODES`] (1-based), if any.
    pub width_code: Option<usize>,
    pub electrodes: Option<String>,
    /// EMG input length in seconds, `None` for the default 0.78 s window.
    pub emg_length_s: Option<f64>,
    pub angle_length_s: Option<f64>,
}

impl Default for Variant {
    fn default() -> Self {
        Self {
            family: Family::PerJoint,
            angle_branch: true,
            width_code: None,
            electrodes: None,
            emg_length_s: None,
            angle_length_s: None,
        }
    }
}

impl Variant {
    pub fn without_angle_branch(mut self) -> Self {
        self.angle_branch = false;
        self
    }

    /// Input window layout of this variant.
    pub fn layout(&self) -> Result<WindowLayout> {
        let mut layout = WindowLayout::default();
        if let Some(code) = &self.electrodes {
            layout.channels = electrode_channels(code)?;
        }
        if let Some(len) = self.emg_length_s {
            layout.emg_samples = WindowLayout::samples_for_length(len, ENVELOPE_RATE_HZ, layout.emg_stride);
        }
        if let Some(len) = self.angle_length_s {
            layout.angle_samples = WindowLayout::samples_for_length(len, ENVELOPE_RATE_HZ, layout.angle_stride);
        }
        if !self.angle_branch {
            layout.angle_samples = 0;
        }
        layout.validate()?;
        if self.angle_branch && layout.angle_samples == 0 {
            return Err(Error::Config("angle input length rounds to zero samples".into()));
        }
        Ok(layout)
    }

    /// Layer widths of each constituent network.
    pub fn network_config(&self) -> Result<SubNetworkConfig> {
        let layout = self.layout()?;
        let outputs = match self.family {
            Family::PerJoint => 1,
            Family::Single | Family::Wide => NUM_DOFS,
        };
        let mut cfg = SubNetworkConfig::from_inputs(layout.emg_input_size(), layout.angle_input_size(), outputs);
        if let Some(k) = self.width_code {
            cfg = cfg.with_emg_hidden(WIDTH_CODES[k - 1]);
        }
        if self.family == Family::Wide {
            cfg = cfg.widened(5);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn network_count(&self) -> usize {
        match self.family {
            Family::PerJoint => NUM_DOFS,
            Family::Single | Family::Wide => 1,
        }
    }

    /// Canonical code; parses back to an equal variant.
    pub fn code(&self) -> String {
        self.to_string()
    }
}

fn parse_length(s: &str) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::Config(format!("bad input length {s:?}")))?;
    if !(0.05..=0.8 + 1e-9).contains(&v) {
        return Err(Error::Config(format!("input length {v} s outside 0.1 to 0.8 s")));
    }
    Ok(v)
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut v = Variant::default();
        let mut family_seen = false;
        for part in s.split('+').map(str::trim) {
            let unknown = || Error::Config(format!("unknown variant code {part:?} in {s:?}"));
            let mut set_family = |family: Family, angle: bool| -> Result<()> {
                if family_seen {
                    return Err(Error::Config(format!("{s:?} names more than one network family")));
                }
                family_seen = true;
                v.family = family;
                v.angle_branch = angle;
                Ok(())
            };
            match part {
                "full" | "" => set_family(Family::PerJoint, true)?,
                "B" => set_family(Family::PerJoint, false)?,
                "I" => set_family(Family::Single, true)?,
                "W" => set_family(Family::Wide, true)?,
                "I-B" => set_family(Family::Single, false)?,
                "W-B" => set_family(Family::Wide, false)?,
                _ if part.starts_with("E-") => {
                    let k: usize = part[2..].parse().map_err(|_| unknown())?;
                    if !(1..=WIDTH_CODES.len()).contains(&k) {
                        return Err(unknown());
                    }
                    v.width_code = Some(k);
                }
                _ if part.starts_with("emg-") => v.emg_length_s = Some(parse_length(&part[4..])?),
                _ if part.starts_with("angle-") => v.angle_length_s = Some(parse_length(&part[6..])?),
                _ if electrode_selection(part).is_some() => v.electrodes = Some(part.to_string()),
                _ => return Err(unknown()),
            }
        }
        Ok(v)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        let family = match (self.family, self.angle_branch) {
            (Family::PerJoint, true) => "full",
            (Family::PerJoint, false) => "B",
            (Family::Single, true) => "I",
            (Family::Single, false) => "I-B",
            (Family::Wide, true) => "W",
            (Family::Wide, false) => "W-B",
        };
        parts.push(family.to_string());
        if let Some(k) = self.width_code {
            parts.push(format!("E-{k}"));
        }
        if let Some(e) = &self.electrodes {
            parts.push(e.clone());
        }
        if let Some(l) = self.emg_length_s {
            parts.push(format!("emg-{l}"));
        }
        if let Some(l) = self.angle_length_s {
            parts.push(format!("angle-{l}"));
        }
        if parts.len() > 1 && parts[0] == "full" {
            parts.remove(0);
        }
        write!(f, "{}", parts.join("+"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(code: &str) -> SubNetworkConfig {
        code.parse::<Variant>().unwrap().network_config().unwrap()
    }

    #[test]
    fn electrode_subsets() {
        assert_eq!(electrode_channels("B1").unwrap(), (0..32).collect::<Vec<_>>());
        assert_eq!(cfg("B1").emg_input, 512);
        assert_eq!(electrode_channels("C3").unwrap(), (32..48).collect::<Vec<_>>());
        let d1 = electrode_channels("D1").unwrap();
        assert_eq!(d1.len(), 48);
        assert!(d1.iter().all(|c| c % 2 == 1));
        let f2 = electrode_channels("F2").unwrap();
        assert_eq!(f2.len(), 24);
        assert_eq!(&f2[..4], &[1, 5, 9, 13]);
        for code in ELECTRODE_CODES {
            let n = electrode_channels(code).unwrap().len();
            assert!([16, 24, 32, 48, 64].contains(&n), "{code}: {n}");
        }
    }

    #[test]
    fn width_codes() {
        assert_eq!(cfg("E-5").emg_hidden, 192);
        assert_eq!(cfg("E-1").emg_hidden, 384);
        assert_eq!(cfg("full").emg_hidden, 512);
        assert_eq!(cfg("B+E-2").merged_width(), 307);
    }

    #[test]
    fn input_lengths() {
        assert_eq!(cfg("emg-0.4").emg_input, 768);
        assert_eq!(cfg("emg-0.8").emg_input, 1536);
        assert_eq!(cfg("angle-0.1").angle_input, 24);
        assert_eq!(cfg("angle-0.4").angle_input, 96);
        assert_eq!(cfg("B+angle-0.4").angle_input, 0);
    }

    #[test]
    fn families() {
        let i = cfg("I");
        assert_eq!(i.outputs, 24);
        assert_eq!(i.emg_hidden, 512);
        let w = cfg("W");
        assert_eq!(w.emg_hidden, 2560);
        assert_eq!("W-B".parse::<Variant>().unwrap().network_count(), 1);
        assert_eq!("B".parse::<Variant>().unwrap().network_count(), 24);
    }

    #[test]
    fn codes_round_trip() {
        for code in ["full", "B", "I", "W-B", "E-3", "B+E-3", "B1", "I-B+F4", "emg-0.4", "B+angle-0.2"] {
            let v: Variant = code.parse().unwrap();
            assert_eq!(v.code(), code);
            assert_eq!(v.code().parse::<Variant>().unwrap(), v);
        }
    }

    #[test]
    fn unknown_codes_rejected() {
        for code in ["E-6", "G1", "B+I", "emg-2.0", "C7", "xyz"] {
            assert!(matches!(code.parse::<Variant>(), Err(Error::Config(_))), "{code}");
        }
    }
}
