//! Published result rows and their reported averages.
//!
//! [`verify`] recomputes every average with [`aggregate_report`] and compares
//! it to the printed value. Printed values carry one decimal, so a match
//! within 0.05 is exact up to rounding.

use serde::Serialize;

use crate::eval::{aggregate_report, ReportRow};

pub const TOLERANCE: f64 = 0.05;

pub const REAL_ROBOT_TASKS: [(&str, &str); 9] = [
    (
        "multiple-object",
        "put the carrot and the hotdog in the pot",
    ),
    (
        "multiple-object",
        "put the red bottle and the hamburger in the pan",
    ),
    (
        "multiple-object",
        "put the pink toy and the blue cube in the basket",
    ),
    ("ood-object", "put the banana in the pot"),
    ("ood-object", "put the purple grape in the pan"),
    ("ood-object", "put the toy car in the basket"),
    ("spatial", "move the object to the right corner"),
    ("spatial", "move the object to the right edge"),
    ("spatial", "move the object to the bottom right corner"),
];

/// One model column of the real-robot table.
#[derive(Debug, Clone, Copy)]
pub struct RealRobotColumn {
    pub model: &'static str,
    pub rates: [f64; 9],
    /// Printed category averages, in [`REAL_ROBOT_TASKS`] group order, if shown.
    pub categories: Option<[f64; 3]>,
    pub overall: f64,
}

pub const REAL_ROBOT_COLUMNS: [RealRobotColumn; 3] = [
    RealRobotColumn {
        model: "NORA",
        rates: [40.0, 30.0, 30.0, 90.0, 90.0, 70.0, 60.0, 20.0, 80.0],
        categories: Some([33.3, 83.3, 53.3]),
        overall: 56.7,
    },
    RealRobotColumn {
        model: "OpenVLA",
        rates: [20.0, 0.0, 30.0, 80.0, 40.0, 50.0, 60.0, 30.0, 50.0],
        categories: None,
        overall: 40.0,
    },
    RealRobotColumn {
        model: "SpatialVLA",
        rates: [0.0, 0.0, 0.0, 20.0, 0.0, 0.0, 30.0, 0.0, 50.0],
        categories: None,
        overall: 11.1,
    },
];

pub const SIM_SUITES: [&str; 4] = ["spatial", "object", "goal", "long"];

/// One model row of the simulation benchmark table.
#[derive(Debug, Clone, Copy)]
pub struct SimRow {
    pub model: &'static str,
    pub scores: [f64; 4],
    pub average: f64,
}

pub const SIM_ROWS: [SimRow; 6] = [
    SimRow {
        model: "OpenVLA",
        scores: [84.7, 88.4, 79.2, 53.7],
        average: 76.5,
    },
    SimRow {
        model: "TraceVLA",
        scores: [84.6, 85.2, 75.1, 54.1],
        average: 74.8,
    },
    SimRow {
        model: "NORA",
        scores: [85.6, 87.8, 77.0, 45.0],
        average: 73.9,
    },
    SimRow {
        model: "SpatialVLA-AC",
        scores: [88.2, 89.9, 78.6, 55.5],
        average: 78.1,
    },
    SimRow {
        model: "NORA-AC",
        scores: [85.6, 89.4, 80.0, 63.0],
        average: 79.5,
    },
    SimRow {
        model: "NORA-Long",
        scores: [92.2, 95.4, 89.4, 74.6],
        average: 87.9,
    },
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub reported: f64,
    pub computed: f64,
    pub ok: bool,
}

impl Check {
    fn new(name: String, reported: f64, computed: f64) -> Self {
        // The epsilon keeps exact half-way cases from failing on float noise.
        let ok = (computed - reported).abs() <= TOLERANCE + 1e-9;
        Self {
            name,
            reported,
            computed,
            ok,
        }
    }
}

pub fn real_robot_rows(column: &RealRobotColumn) -> Vec<ReportRow> {
    REAL_ROBOT_TASKS
        .iter()
        .zip(column.rates)
        .map(|((cat, task), rate)| ReportRow::from_rate(cat, task, rate))
        .collect()
}

/// Recomputes every printed average. The result is in table order.
pub fn verify() -> Vec<Check> {
    let mut checks = Vec::new();
    for col in &REAL_ROBOT_COLUMNS {
        let rep = aggregate_report(real_robot_rows(col));
        if let Some(printed) = col.categories {
            for (c, want) in rep.categories.iter().zip(printed) {
                checks.push(Check::new(
                    format!("real-robot {} {}", col.model, c.category),
                    want,
                    c.average,
                ));
            }
        }
        checks.push(Check::new(
            format!("real-robot {} overall", col.model),
            col.overall,
            rep.overall,
        ));
    }
    for row in &SIM_ROWS {
        let rows = SIM_SUITES
            .iter()
            .zip(row.scores)
            .map(|(s, v)| ReportRow::from_rate("benchmark", s, v))
            .collect();
        let rep = aggregate_report(rows);
        checks.push(Check::new(
            format!("simulation {} average", row.model),
            row.average,
            rep.overall,
        ));
    }
    checks
}
