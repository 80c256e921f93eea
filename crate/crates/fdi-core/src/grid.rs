//! Bus/branch case files and the DC measurement Jacobian built from them.
//!
//! The DC convention: states are the voltage angles of all non-slack buses in
//! file order, the slack angle is pinned at zero and its column dropped, and
//! the flow on a branch with reactance `x` from bus `i` to bus `j` is
//! `(theta_i - theta_j) / x`.

use std::collections::{HashMap, HashSet};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::measurement::MeasurementMatrix;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bus {
    pub id: u32,
    pub is_slack: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: u32,
    pub to: u32,
    pub reactance: f64,
}

/// A validated bus/branch network description.
#[derive(Debug, Clone)]
pub struct GridCase {
    buses: Vec<Bus>,
    branches: Vec<Branch>,
}

/// One meter: either a directed line-flow reading on a branch or a net
/// injection reading at a bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Meter {
    /// Flow on the 1-based branch index; `reverse` measures to->from.
    Flow { branch: usize, reverse: bool },
    /// Net injection at a bus id.
    Injection { bus: u32 },
}

/// Ordered meter list; the order is the row order of the Jacobian.
#[derive(Debug, Clone)]
pub struct MeterPlan {
    entries: Vec<Meter>,
}

impl GridCase {
    /// Validates bus and branch lists: unique ids, exactly one slack,
    /// positive reactances, resolvable endpoints, connected graph.
    pub fn new(buses: Vec<Bus>, branches: Vec<Branch>) -> Result<Self> {
        if buses.is_empty() {
            return Err(Error::Validation("case has no buses".into()));
        }
        let mut seen = HashSet::new();
        for bus in &buses {
            if !seen.insert(bus.id) {
                return Err(Error::Validation(format!("duplicate bus id {}", bus.id)));
            }
        }
        match buses.iter().filter(|b| b.is_slack).count() {
            0 => return Err(Error::Validation("no slack bus declared".into())),
            1 => {}
            n => return Err(Error::Validation(format!("{n} slack buses declared, expected 1"))),
        }
        for (idx, branch) in branches.iter().enumerate() {
            if !(branch.reactance > 0.0) {
                return Err(Error::Validation(format!(
                    "nonpositive reactance {} on branch {}",
                    branch.reactance,
                    idx + 1
                )));
            }
            for end in [branch.from, branch.to] {
                if !seen.contains(&end) {
                    return Err(Error::Validation(format!(
                        "branch {} references unknown bus {end}",
                        idx + 1
                    )));
                }
            }
            if branch.from == branch.to {
                return Err(Error::Validation(format!("branch {} is a self-loop", idx + 1)));
            }
        }
        let case = Self { buses, branches };
        if !case.is_connected() {
            return Err(Error::Validation("branch graph is not connected".into()));
        }
        Ok(case)
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn slack(&self) -> u32 {
        self.buses.iter().find(|b| b.is_slack).expect("validated").id
    }

    /// State dimension of the DC model: one angle per non-slack bus.
    pub fn state_count(&self) -> usize {
        self.buses.len() - 1
    }

    fn is_connected(&self) -> bool {
        let index: HashMap<u32, usize> =
            self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        let mut adjacency = vec![Vec::new(); self.buses.len()];
        for branch in &self.branches {
            let (i, j) = (index[&branch.from], index[&branch.to]);
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        let mut visited = vec![false; self.buses.len()];
        let mut stack = vec![0];
        visited[0] = true;
        while let Some(node) = stack.pop() {
            for &next in &adjacency[node] {
                if !visited[next] {
                    visited[next] = true;
                    stack.push(next);
                }
            }
        }
        visited.into_iter().all(|v| v)
    }
}

impl MeterPlan {
    pub fn new(entries: Vec<Meter>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Validation("meter plan is empty".into()));
        }
        Ok(Self { entries })
    }

    /// Full coverage: every branch metered in both directions, then every bus
    /// injection, in case order.
    pub fn full(case: &GridCase) -> Self {
        let mut entries = Vec::with_capacity(2 * case.branches().len() + case.buses().len());
        for branch in 1..=case.branches().len() {
            entries.push(Meter::Flow { branch, reverse: false });
            entries.push(Meter::Flow { branch, reverse: true });
        }
        for bus in case.buses() {
            entries.push(Meter::Injection { bus: bus.id });
        }
        Self { entries }
    }

    pub fn entries(&self) -> &[Meter] {
        &self.entries
    }

    pub fn meter_count(&self) -> usize {
        self.entries.len()
    }
}

/// Parses the line-oriented case format:
///
/// ```text
/// # comment
/// bus 1 slack
/// bus 2
/// branch 1 2 0.5
/// ```
pub fn parse_case(text: &str) -> Result<GridCase> {
    let mut buses = Vec::new();
    let mut branches = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        match tokens[0] {
            "bus" => {
                let id = match tokens.get(1) {
                    Some(t) => t.parse::<u32>().map_err(|_| Error::Parse {
                        line: line_no,
                        message: format!("invalid bus id `{t}`", t = t),
                    })?,
                    None => {
                        return Err(Error::Parse {
                            line: line_no,
                            message: "bus requires an id".into(),
                        })
                    }
                };
                let is_slack = match tokens.get(2) {
                    None => false,
                    Some(&"slack") => true,
                    Some(t) => {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("unexpected token `{t}` after bus id"),
                        })
                    }
                };
                if tokens.len() > 3 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "trailing tokens on bus line".into(),
                    });
                }
                buses.push(Bus { id, is_slack });
            }
            "branch" => {
                if tokens.len() != 4 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "branch requires `branch <from> <to> <reactance>`".into(),
                    });
                }
                let from = tokens[1].parse::<u32>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("invalid bus id `{}`", tokens[1]),
                })?;
                let to = tokens[2].parse::<u32>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("invalid bus id `{}`", tokens[2]),
                })?;
                let reactance = tokens[3].parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("invalid reactance `{}`", tokens[3]),
                })?;
                branches.push(Branch { from, to, reactance });
            }
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("unknown directive `{other}`"),
                })
            }
        }
    }
    GridCase::new(buses, branches)
}

/// Builds the DC Jacobian for a meter plan over a case and wraps it with its
/// complement. Fails when the plan leaves the model underdetermined or
/// rank-deficient.
pub fn build_dc_jacobian(case: &GridCase, plan: &MeterPlan) -> Result<MeasurementMatrix> {
    let k = case.state_count();
    let m = plan.meter_count();
    if m <= k {
        return Err(Error::Underdetermined { m, k });
    }
    // Column index per non-slack bus, in file order.
    let mut column: HashMap<u32, usize> = HashMap::new();
    for bus in case.buses() {
        if !bus.is_slack {
            column.insert(bus.id, column.len());
        }
    }
    let mut h = DMatrix::<f64>::zeros(m, k);
    for (row, meter) in plan.entries().iter().enumerate() {
        match *meter {
            Meter::Flow { branch, reverse } => {
                let b = case.branches().get(branch.wrapping_sub(1)).ok_or_else(|| {
                    Error::Validation(format!("meter {} references unknown branch {branch}", row + 1))
                })?;
                let (from, to) = if reverse { (b.to, b.from) } else { (b.from, b.to) };
                add_flow(&mut h, row, &column, from, to, 1.0 / b.reactance);
            }
            Meter::Injection { bus } => {
                if !case.buses().iter().any(|b| b.id == bus) {
                    return Err(Error::Validation(format!(
                        "meter {} references unknown bus {bus}",
                        row + 1
                    )));
                }
                for b in case.branches() {
                    if b.from == bus {
                        add_flow(&mut h, row, &column, b.from, b.to, 1.0 / b.reactance);
                    } else if b.to == bus {
                        add_flow(&mut h, row, &column, b.to, b.from, 1.0 / b.reactance);
                    }
                }
            }
        }
    }
    MeasurementMatrix::from_jacobian(h)
}

fn add_flow(h: &mut DMatrix<f64>, row: usize, column: &HashMap<u32, usize>, from: u32, to: u32, w: f64) {
    if let Some(&c) = column.get(&from) {
        h[(row, c)] += w;
    }
    if let Some(&c) = column.get(&to) {
        h[(row, c)] -= w;
    }
}
