//! Machine-readable and human-readable check reports.

use serde::{Deserialize, Serialize};

use crate::checker::{Status, ThadVerdict};
use crate::model::ThadSet;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Witness feasibility is never established: branch conditions that do not
/// involve constants are treated as nondeterministic.
pub const FEASIBILITY_NOT_PROVEN: &str = "not-proven";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessStep {
    /// Rendered call event, e.g. `ioctl(t1, MSG)`.
    pub call: String,
    pub routine: String,
    /// `file:line`.
    pub location: String,
    pub line: usize,
    pub column: usize,
    pub function: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub id: String,
    pub dependency: String,
    pub dependent: String,
    pub status: Status,
    pub trivial: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub via_alias: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<WitnessStep>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasibility: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Path-oracle outcome when requested: every enumerated path
    /// satisfies the THAD.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<bool>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    /// Satisfied with at least one dependent call site.
    pub satisfied: usize,
    pub violated: usize,
    pub inconclusive: usize,
    pub trivially_satisfied: usize,
}

impl Summary {
    pub fn total(&self) -> usize {
        self.satisfied + self.violated + self.inconclusive + self.trivially_satisfied
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub spec: String,
    pub program: String,
    pub entries: Vec<Entry>,
    pub summary: Summary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
}

impl Report {
    /// Assemble a report from verdicts (already sorted by id).
    pub fn new(spec: &str, program: &str, set: &ThadSet, verdicts: &[ThadVerdict]) -> Report {
        let mut summary = Summary::default();
        let entries = verdicts
            .iter()
            .map(|v| {
                let thad = set.thad(&v.id).expect("verdicts come from the set");
                match (v.status, v.trivial) {
                    (Status::Satisfied, true) => summary.trivially_satisfied += 1,
                    (Status::Satisfied, false) => summary.satisfied += 1,
                    (Status::Violated, _) => summary.violated += 1,
                    (Status::Inconclusive, _) => summary.inconclusive += 1,
                }
                let witness = v.witness.as_ref().map(|w| {
                    w.events
                        .iter()
                        .map(|e| WitnessStep {
                            call: e.event.to_string(),
                            routine: e.event.routine.clone(),
                            location: format!("{program}:{}", e.line),
                            line: e.line,
                            column: e.column,
                            function: e.function.clone(),
                        })
                        .collect()
                });
                Entry {
                    id: v.id.clone(),
                    dependency: thad.dependency.to_string(),
                    dependent: thad.dependent.to_string(),
                    status: v.status,
                    trivial: v.trivial,
                    via_alias: v.via_alias.clone(),
                    feasibility: witness.as_ref().map(|_| FEASIBILITY_NOT_PROVEN.to_string()),
                    witness,
                    reason: v.reason.clone(),
                    oracle: None,
                }
            })
            .collect();
        Report {
            tool: "thadc".into(),
            version: TOOL_VERSION.into(),
            spec: spec.into(),
            program: program.into(),
            entries,
            summary,
            wall_time_ms: None,
        }
    }

    /// 0 all satisfied, 1 any violated, 3 inconclusive without violation.
    pub fn exit_code(&self) -> i32 {
        if self.summary.violated > 0 {
            1
        } else if self.summary.inconclusive > 0 {
            3
        } else {
            0
        }
    }

    /// Ids of THADs satisfied with at least one dependent call site.
    pub fn nontrivially_satisfied(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.status == Status::Satisfied && !e.trivial)
            .map(|e| e.id.as_str())
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialise");
        s.push('\n');
        s
    }

    pub fn render_text(&self, color: bool) -> String {
        let paint = |code: &str, text: &str| {
            if color {
                format!("\x1b[{code}m{text}\x1b[0m")
            } else {
                text.to_string()
            }
        };
        let mut out = format!("{} against {}\n", self.program, self.spec);
        let width = self.entries.iter().map(|e| e.id.len()).max().unwrap_or(0);
        for e in &self.entries {
            let status = match (e.status, e.trivial) {
                (Status::Satisfied, true) => paint("2", "trivially satisfied"),
                (Status::Satisfied, false) => paint("32", "satisfied"),
                (Status::Violated, _) => paint("1;31", "VIOLATED"),
                (Status::Inconclusive, _) => paint("33", "inconclusive"),
            };
            out.push_str(&format!(
                "  {:width$}  {} requires {}: {status}",
                e.id, e.dependent, e.dependency
            ));
            if !e.via_alias.is_empty() {
                out.push_str(&format!(" (via alias {})", e.via_alias.join(", ")));
            }
            out.push('\n');
            if let Some(w) = &e.witness {
                out.push_str(&format!(
                    "  {:width$}    witness (feasibility {}):\n",
                    "", FEASIBILITY_NOT_PROVEN
                ));
                for step in w {
                    out.push_str(&format!(
                        "  {:width$}      {} at {} in {}\n",
                        "", step.call, step.location, step.function
                    ));
                }
            }
            if let Some(r) = &e.reason {
                out.push_str(&format!("  {:width$}    reason: {r}\n", ""));
            }
        }
        let s = &self.summary;
        out.push_str(&format!(
            "summary: {} satisfied, {} violated, {} inconclusive, {} trivially satisfied",
            s.satisfied, s.violated, s.inconclusive, s.trivially_satisfied
        ));
        if let Some(ms) = self.wall_time_ms {
            out.push_str(&format!(" ({ms} ms)"));
        }
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::check;
    use crate::frontend::load;
    use crate::spec::spidev;

    #[test]
    fn counts_sum_to_total_and_exit_code_follows_status() {
        let set = spidev();
        let src = "int main(void) {\n    int fd = open(\"/dev/spidev0.0\", 2);\n    read(fd, 0, 4);\n    close(fd);\n    return 0;\n}\n";
        let prog = load(src, "p.c", &set, 16).unwrap();
        let r = Report::new("spidev.thad", "p.c", &set, &check(&prog, &set));
        assert_eq!(r.summary.total(), 26);
        assert_eq!(r.nontrivially_satisfied(), vec!["d1", "d4"]);
        // read without the configuration writes violates d15, d18, d21, d24.
        assert_eq!(r.summary.violated, 4);
        assert_eq!(r.exit_code(), 1);
        let e = r.entries.iter().find(|e| e.id == "d24").unwrap();
        let w = e.witness.as_ref().unwrap();
        assert_eq!(w.last().unwrap().routine, "read");
        assert_eq!(w.last().unwrap().location, "p.c:3");
        assert_eq!(e.feasibility.as_deref(), Some(FEASIBILITY_NOT_PROVEN));
        let back: Report = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
