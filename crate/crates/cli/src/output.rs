//! CSV series and run reports.
//!
//! Every number is written with 17 significant digits in `{:e}` notation, so
//! output is locale independent and round-trips exactly.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use cavity_node::{Budgets, ControlPulse, MultiTrajectory, SimOutcome, Trajectory, C64};
use serde::Serialize;

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for row in rows {
        line.clear();
        for (i, x) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            write!(line, "{x:.16e}").expect("writing to a String cannot fail");
        }
        writeln!(w, "{line}")?;
    }
    w.flush()
}

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn push_complex(row: &mut Vec<f64>, z: C64) {
    row.push(z.re);
    row.push(z.im);
}

pub fn write_margin(path: &Path, times: &[f64], margin: &[f64]) -> io::Result<()> {
    write_csv(path, &cols(&["t", "margin"]), times.iter().zip(margin).map(|(t, m)| vec![*t, *m]))
}

/// Pulse with the node amplitudes it was built for.
pub fn write_pulse(path: &Path, pulse: &ControlPulse, traj: &Trajectory) -> io::Result<()> {
    let header = cols(&["t", "omega_mag", "omega_phase", "re_g", "im_g", "re_r", "im_r", "re_e", "im_e"]);
    let rows = pulse.grid().times().enumerate().map(|(k, t)| {
        let mut row = vec![t, pulse.magnitude()[k], pulse.phase()[k]];
        push_complex(&mut row, traj.g[k]);
        push_complex(&mut row, traj.r[k]);
        push_complex(&mut row, traj.e[k]);
        row
    });
    write_csv(path, &header, rows)
}

fn level_columns(n: usize) -> Vec<String> {
    (1..=n).flat_map(|k| [format!("re_r_{k}"), format!("im_r_{k}")]).collect()
}

pub fn write_pulse_n(path: &Path, pulse: &ControlPulse, traj: &MultiTrajectory) -> io::Result<()> {
    let mut header = cols(&["t", "omega_mag", "omega_phase", "re_g", "im_g"]);
    header.extend(level_columns(traj.n_levels()));
    header.extend(cols(&["re_e", "im_e"]));
    let rows = pulse.grid().times().enumerate().map(|(k, t)| {
        let mut row = vec![t, pulse.magnitude()[k], pulse.phase()[k]];
        push_complex(&mut row, traj.g[k]);
        traj.r[k].iter().for_each(|z| push_complex(&mut row, *z));
        push_complex(&mut row, traj.e[k]);
        row
    });
    write_csv(path, &header, rows)
}

pub fn write_trajectory(path: &Path, out: &SimOutcome) -> io::Result<()> {
    let header = cols(&[
        "t", "re_ain", "im_ain", "re_aout", "im_aout", "re_g", "im_g", "re_r", "im_r", "re_e", "im_e", "node_prob",
    ]);
    let traj = &out.trajectory;
    let prob = traj.node_probability();
    let rows = traj.grid.times().enumerate().map(|(k, t)| {
        let mut row = vec![t];
        push_complex(&mut row, out.alpha_in[k]);
        push_complex(&mut row, out.alpha_out[k]);
        push_complex(&mut row, traj.g[k]);
        push_complex(&mut row, traj.r[k]);
        push_complex(&mut row, traj.e[k]);
        row.push(prob[k]);
        row
    });
    write_csv(path, &header, rows)
}

pub fn write_trajectory_n(path: &Path, out: &SimOutcome<MultiTrajectory>) -> io::Result<()> {
    let traj = &out.trajectory;
    let mut header = cols(&["t", "re_ain", "im_ain", "re_aout", "im_aout", "re_g", "im_g"]);
    header.extend(level_columns(traj.n_levels()));
    header.extend(cols(&["re_e", "im_e", "node_prob"]));
    let prob = traj.node_probability();
    let rows = traj.grid.times().enumerate().map(|(k, t)| {
        let mut row = vec![t];
        push_complex(&mut row, out.alpha_in[k]);
        push_complex(&mut row, out.alpha_out[k]);
        push_complex(&mut row, traj.g[k]);
        traj.r[k].iter().for_each(|z| push_complex(&mut row, *z));
        push_complex(&mut row, traj.e[k]);
        row.push(prob[k]);
        row
    });
    write_csv(path, &header, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Feasible,
    Infeasible,
    Completed,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Efficiencies {
    /// Closed-form value.
    pub predicted: Option<f64>,
    /// Value carried by the synthesized trajectory.
    pub synthesized: Option<f64>,
    /// Forward simulation of the synthesized pulse.
    pub simulated: Option<f64>,
    /// `|predicted - simulated|`.
    pub abs_difference: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetSummary {
    pub initial: f64,
    pub input: f64,
    pub node_prob: f64,
    pub emitted: f64,
    pub spurious_cavity: f64,
    pub spontaneous: f64,
    pub balance_residual: f64,
}

impl From<Budgets> for BudgetSummary {
    fn from(b: Budgets) -> Self {
        Self {
            initial: b.initial,
            input: b.input,
            node_prob: b.node_prob,
            emitted: b.emitted,
            spurious_cavity: b.spurious_cavity,
            spontaneous: b.spontaneous,
            balance_residual: b.balance_residual(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub mode: String,
    pub verdict: Verdict,
    pub min_margin: Option<f64>,
    pub argmin_t: Option<f64>,
    pub efficiency: Option<Efficiencies>,
    pub budgets: Option<BudgetSummary>,
    /// Normalized overlap of the emitted field with the target envelope.
    pub overlap: Option<f64>,
    pub warnings: Vec<String>,
    /// Mode-specific findings, one line each.
    pub notes: Vec<String>,
    pub files: Vec<String>,
}

impl RunReport {
    pub fn new(mode: impl Into<String>, verdict: Verdict) -> Self {
        Self {
            mode: mode.into(),
            verdict,
            min_margin: None,
            argmin_t: None,
            efficiency: None,
            budgets: None,
            overlap: None,
            warnings: Vec::new(),
            notes: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.verdict {
            Verdict::Infeasible => 2,
            _ => 0,
        }
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let opt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), fmt_num);
        let _ = writeln!(s, "mode: {}", self.mode);
        let verdict = match self.verdict {
            Verdict::Feasible => "feasible",
            Verdict::Infeasible => "infeasible: no control pulse can transfer this photon without entanglement",
            Verdict::Completed => "completed",
        };
        let _ = writeln!(s, "verdict: {verdict}");
        if self.min_margin.is_some() {
            let _ = writeln!(s, "min margin: {} at t = {}", opt(self.min_margin), opt(self.argmin_t));
        }
        if let Some(e) = &self.efficiency {
            let _ = writeln!(s, "efficiency:");
            let _ = writeln!(s, "  predicted (closed form): {}", opt(e.predicted));
            let _ = writeln!(s, "  synthesized:             {}", opt(e.synthesized));
            let _ = writeln!(s, "  simulated:               {}", opt(e.simulated));
            let _ = writeln!(s, "  |predicted - simulated|: {}", opt(e.abs_difference));
        }
        if let Some(o) = self.overlap {
            let _ = writeln!(s, "output overlap with target: {}", fmt_num(o));
        }
        if let Some(b) = &self.budgets {
            let _ = writeln!(s, "probability budget:");
            let _ = writeln!(s, "  initial node population: {}", fmt_num(b.initial));
            let _ = writeln!(s, "  input photon:            {}", fmt_num(b.input));
            let _ = writeln!(s, "  final node population:   {}", fmt_num(b.node_prob));
            let _ = writeln!(s, "  emitted:                 {}", fmt_num(b.emitted));
            let _ = writeln!(s, "  spurious cavity loss:    {}", fmt_num(b.spurious_cavity));
            let _ = writeln!(s, "  spontaneous emission:    {}", fmt_num(b.spontaneous));
            let _ = writeln!(s, "  balance residual:        {}", fmt_num(b.balance_residual));
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        if !self.files.is_empty() {
            let _ = writeln!(s, "files:");
            for f in &self.files {
                let _ = writeln!(s, "  {f}");
            }
        }
        s
    }

    pub fn write(&mut self, dir: &Path, prefix: &str) -> io::Result<()> {
        let text_name = format!("{prefix}_report.txt");
        let json_name = format!("{prefix}_summary.json");
        self.files.push(text_name.clone());
        self.files.push(json_name.clone());
        std::fs::write(dir.join(&text_name), self.render_text())?;
        let json = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        std::fs::write(dir.join(&json_name), json + "\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_at_17_digits() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_num(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(RunReport::new("trap", Verdict::Infeasible).exit_code(), 2);
        assert_eq!(RunReport::new("trap", Verdict::Feasible).exit_code(), 0);
    }
}
