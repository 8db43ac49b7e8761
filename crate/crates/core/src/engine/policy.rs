//! Per-date action tables recorded during backward induction, and their
//! tabular text exchange format.
//!
//! The format is line-oriented CSV with `#`-prefixed header lines:
//!
//! ```text
//! # gmwb-policy v1
//! # jump_dates=9 a_nodes=21 w_nodes=401
//! date_index,time,a_index,a_value,w_index,w_value,action,amount
//! 1,1,0,0,0,0,withdraw,0
//! ...
//! ```
//!
//! One row per (jump date, guarantee node, wealth node). `action` is
//! `withdraw` (amount 0 means no withdrawal) or `surrender` (amount 0; the
//! cash value is a function of the simulated state). Numbers use `.` as the
//! decimal separator and round-trip f64 exactly.

use std::io::{self, BufRead, Write};

use thiserror::Error;

/// Action chosen at one (date, wealth, guarantee) lattice point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyAction {
    /// Withdraw the given amount from the guarantee (0 = hold).
    Withdraw(f64),
    /// Terminate the contract for the surrender cashflow.
    Surrender,
}

#[derive(Debug, Error)]
pub enum PolicyIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing policy entry at date {date}, a_index {a_index}, w_index {w_index}")]
    Missing {
        date: usize,
        a_index: usize,
        w_index: usize,
    },
}

/// Action table over the full (date, guarantee, wealth) lattice, for jump
/// dates 1..=N-1.
#[derive(Debug, Clone)]
pub struct PolicyMap {
    pub w_nodes: Vec<f64>,
    pub a_nodes: Vec<f64>,
    /// Times t_n of the jump dates, ascending.
    pub times: Vec<f64>,
    /// `actions[d][j][m]`: action at jump date d+1, guarantee node j,
    /// wealth node m.
    pub actions: Vec<Vec<Vec<PolicyAction>>>,
}

impl PolicyMap {
    pub fn num_jump_dates(&self) -> usize {
        self.actions.len()
    }

    /// Looks up the action for a simulated state at jump date `date`
    /// (1-based).
    ///
    /// The guarantee is snapped to the nearest lattice node (lower node on
    /// ties). In wealth the two bracketing nodes are consulted: if both
    /// prescribe withdrawals the amount is interpolated linearly, otherwise
    /// the action of the nearer node wins, which places the policy's switch
    /// threshold at the midpoint of the bracketing interval.
    pub fn action_at(&self, date: usize, wealth: f64, guarantee: f64) -> PolicyAction {
        debug_assert!((1..=self.num_jump_dates()).contains(&date));
        let grid = &self.actions[date - 1];

        let mut j = 0usize;
        let mut best = f64::INFINITY;
        for (idx, &a) in self.a_nodes.iter().enumerate() {
            let d = (a - guarantee).abs();
            if d < best {
                best = d;
                j = idx;
            }
        }
        let row = &grid[j];

        let n = self.w_nodes.len();
        if wealth <= self.w_nodes[0] {
            return row[0];
        }
        if wealth >= self.w_nodes[n - 1] {
            return row[n - 1];
        }
        let hi = self.w_nodes.partition_point(|&w| w < wealth).min(n - 1);
        let lo = hi - 1;
        match (row[lo], row[hi]) {
            (PolicyAction::Withdraw(g0), PolicyAction::Withdraw(g1)) => {
                let t = (wealth - self.w_nodes[lo]) / (self.w_nodes[hi] - self.w_nodes[lo]);
                PolicyAction::Withdraw(g0 + t * (g1 - g0))
            }
            (a, b) => {
                let mid = 0.5 * (self.w_nodes[lo] + self.w_nodes[hi]);
                if wealth <= mid {
                    a
                } else {
                    b
                }
            }
        }
    }

    pub fn to_writer<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# gmwb-policy v1")?;
        writeln!(
            out,
            "# jump_dates={} a_nodes={} w_nodes={}",
            self.actions.len(),
            self.a_nodes.len(),
            self.w_nodes.len()
        )?;
        writeln!(out, "date_index,time,a_index,a_value,w_index,w_value,action,amount")?;
        for (d, per_date) in self.actions.iter().enumerate() {
            let date = d + 1;
            let time = self.times[d];
            for (j, row) in per_date.iter().enumerate() {
                for (m, action) in row.iter().enumerate() {
                    let (code, amount) = match action {
                        PolicyAction::Withdraw(g) => ("withdraw", *g),
                        PolicyAction::Surrender => ("surrender", 0.0),
                    };
                    writeln!(
                        out,
                        "{date},{time},{j},{},{m},{},{code},{amount}",
                        self.a_nodes[j], self.w_nodes[m]
                    )?;
                }
            }
        }
        Ok(())
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, PolicyIoError> {
        let mut dims: Option<(usize, usize, usize)> = None;
        let mut rows: Vec<(usize, f64, usize, f64, usize, f64, PolicyAction)> = Vec::new();

        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                for token in rest.split_whitespace() {
                    if let Some((key, val)) = token.split_once('=') {
                        let val: usize = val.parse().map_err(|_| PolicyIoError::Parse {
                            line: line_no,
                            message: format!("bad header value in {token:?}"),
                        })?;
                        let d = dims.get_or_insert((0, 0, 0));
                        match key {
                            "jump_dates" => d.0 = val,
                            "a_nodes" => d.1 = val,
                            "w_nodes" => d.2 = val,
                            _ => {}
                        }
                    }
                }
                continue;
            }
            if trimmed.starts_with("date_index") {
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').collect();
            if fields.len() != 8 {
                return Err(PolicyIoError::Parse {
                    line: line_no,
                    message: format!("expected 8 fields, got {}", fields.len()),
                });
            }
            let parse_usize = |s: &str, what: &str| -> Result<usize, PolicyIoError> {
                s.parse().map_err(|_| PolicyIoError::Parse {
                    line: line_no,
                    message: format!("bad {what}: {s:?}"),
                })
            };
            let parse_f64 = |s: &str, what: &str| -> Result<f64, PolicyIoError> {
                s.parse().map_err(|_| PolicyIoError::Parse {
                    line: line_no,
                    message: format!("bad {what}: {s:?}"),
                })
            };
            let date = parse_usize(fields[0], "date_index")?;
            let time = parse_f64(fields[1], "time")?;
            let a_index = parse_usize(fields[2], "a_index")?;
            let a_value = parse_f64(fields[3], "a_value")?;
            let w_index = parse_usize(fields[4], "w_index")?;
            let w_value = parse_f64(fields[5], "w_value")?;
            let amount = parse_f64(fields[7], "amount")?;
            let action = match fields[6] {
                "withdraw" => PolicyAction::Withdraw(amount),
                "surrender" => PolicyAction::Surrender,
                other => {
                    return Err(PolicyIoError::Parse {
                        line: line_no,
                        message: format!("unknown action {other:?}"),
                    })
                }
            };
            rows.push((date, time, a_index, a_value, w_index, w_value, action));
        }

        let (n_dates, n_a, n_w) = dims.ok_or(PolicyIoError::Parse {
            line: 0,
            message: "missing dimension header".into(),
        })?;
        if n_dates == 0 || n_a == 0 || n_w == 0 {
            return Err(PolicyIoError::Parse {
                line: 0,
                message: format!("degenerate dimensions {n_dates}x{n_a}x{n_w}"),
            });
        }

        let mut w_nodes = vec![f64::NAN; n_w];
        let mut a_nodes = vec![f64::NAN; n_a];
        let mut times = vec![f64::NAN; n_dates];
        let mut actions = vec![vec![vec![None::<PolicyAction>; n_w]; n_a]; n_dates];
        for (date, time, j, a_value, m, w_value, action) in rows {
            if date == 0 || date > n_dates || j >= n_a || m >= n_w {
                return Err(PolicyIoError::Parse {
                    line: 0,
                    message: format!("index out of range: date {date}, a {j}, w {m}"),
                });
            }
            times[date - 1] = time;
            a_nodes[j] = a_value;
            w_nodes[m] = w_value;
            actions[date - 1][j][m] = Some(action);
        }

        let mut filled = Vec::with_capacity(n_dates);
        for (d, per_date) in actions.into_iter().enumerate() {
            let mut rows_out = Vec::with_capacity(n_a);
            for (j, row) in per_date.into_iter().enumerate() {
                let mut out = Vec::with_capacity(n_w);
                for (m, cell) in row.into_iter().enumerate() {
                    out.push(cell.ok_or(PolicyIoError::Missing {
                        date: d + 1,
                        a_index: j,
                        w_index: m,
                    })?);
                }
                rows_out.push(out);
            }
            filled.push(rows_out);
        }

        Ok(PolicyMap {
            w_nodes,
            a_nodes,
            times,
            actions: filled,
        })
    }
}
