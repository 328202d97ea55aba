//! Rendering of verification reports, as text for people and as JSON
//! lines for programs.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde_json::{json, Value as Json};

use crate::checker::{Failure, Report, Verdict, Witness, XiTable};
use crate::task::{Cell, ConditionVerdict, CrossChainTask, FeasibilityWitness, PartyId};

fn set_label(task: &CrossChainTask, set: &BTreeSet<PartyId>) -> String {
    let names: Vec<&str> = set.iter().map(|p| task.parties()[p.0].as_str()).collect();
    format!("{{{}}}", names.join(","))
}

fn utilities_label(task: &CrossChainTask, cell: Cell) -> String {
    let row = task.utilities(cell).map(<[_]>::to_vec).unwrap_or_default();
    let parts: Vec<String> = task
        .parties()
        .iter()
        .zip(&row)
        .map(|(p, u)| format!("{p}={u}"))
        .collect();
    parts.join(" ")
}

fn describe_witness(task: &CrossChainTask, w: &FeasibilityWitness) -> String {
    match w {
        FeasibilityWitness::InputNotAnOutput { vector, .. } => {
            format!("input vector {vector} is not an output vector")
        }
        FeasibilityWitness::NullTransitionUnacceptable { cell } => format!(
            "null transition from {} is unacceptable ({})",
            task.contract_inputs()[cell.contract_inputs],
            utilities_label(task, *cell)
        ),
        FeasibilityWitness::NoPreferredOutcome {
            party_inputs,
            contract_inputs,
        } => format!(
            "no preferred outcome from {} {}",
            task.party_inputs()[*party_inputs],
            task.contract_inputs()[*contract_inputs]
        ),
        FeasibilityWitness::InputLieHurts { party, truthful, altered } => format!(
            "a false input for {} turns {} into {}",
            task.parties()[party.0],
            task.outputs()[truthful.outputs],
            task.outputs()[altered.outputs]
        ),
    }
}

fn condition_line(out: &mut String, task: &CrossChainTask, name: &str, v: &ConditionVerdict) {
    let _ = write!(out, "  {} {name}", if v.pass { "PASS" } else { "FAIL" });
    if let Some(w) = &v.witness {
        let _ = write!(out, ": {}", describe_witness(task, w));
    }
    out.push('\n');
}

fn xi_block(out: &mut String, report: &Report, table: &XiTable) {
    let task = &report.task;
    let outcomes: Vec<String> = table.outcomes.keys().map(|&o| task.outputs()[o].to_string()).collect();
    let _ = writeln!(
        out,
        "  Xi({}) = {{{}}}  ({} executions)",
        set_label(task, &table.compliance),
        outcomes.join(", "),
        table.executions
    );
    for (&o, w) in &table.outcomes {
        let _ = writeln!(
            out,
            "    {}  {}  via {}",
            task.outputs()[o],
            utilities_label(task, Cell::new(0, table.contract_inputs, o)),
            w
        );
    }
}

fn verdict_block(out: &mut String, report: &Report, v: &Verdict) {
    let status = if v.pass { "PASS" } else { "FAIL" };
    let _ = write!(out, "{status} {}", v.property.title());
    if v.vacuous {
        out.push_str(" (vacuous)");
    }
    out.push('\n');
    if let Some(f) = &v.failure {
        failure_block(out, report, f);
    }
}

fn failure_block(out: &mut String, report: &Report, f: &Failure) {
    let _ = writeln!(out, "  reason: {}", f.reason);
    let _ = writeln!(out, "  input: {}", report.task.contract_inputs()[f.witness.contract_inputs]);
    let _ = writeln!(out, "  witness: {}", f.witness);
    if let Some((outcome, w)) = &f.baseline {
        let _ = writeln!(out, "  compliant baseline: {outcome} via {w}");
    }
    out.push_str("  trace:\n");
    for e in &f.trace {
        let _ = writeln!(out, "    {e}");
    }
}

/// Human-readable report. The last lines are one verdict per property.
pub fn render_text(report: &Report) -> String {
    let task = &report.task;
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {}", report.scenario);
    let parties: Vec<String> = task
        .parties()
        .iter()
        .zip(&report.displays)
        .map(|(n, d)| if n == d { n.clone() } else { format!("{n} ({d})") })
        .collect();
    let _ = writeln!(out, "parties: {}", parties.join(", "));
    let _ = writeln!(out, "contracts: {}", task.contracts().join(", "));
    let policies: Vec<&str> = report.options.policies.iter().map(|p| p.as_str()).collect();
    let _ = writeln!(
        out,
        "delta {}, horizon {}, policies {}{}",
        report.delta,
        report.horizon,
        policies.join(", "),
        if report.options.exhaustive_order { ", all message orders" } else { "" }
    );
    let sizes: Vec<String> = task
        .parties()
        .iter()
        .zip(&report.catalog_sizes)
        .map(|(p, n)| format!("{p} {n}"))
        .collect();
    let _ = writeln!(
        out,
        "catalog: {}, joint {}",
        sizes.join(", "),
        report.joint_entries
    );
    let _ = writeln!(out, "executions: {}", report.executions());
    out.push('\n');

    out.push_str("Feasibility\n");
    condition_line(&mut out, task, "null transition", &report.feasibility.null_transition);
    condition_line(&mut out, task, "preferred outcome", &report.feasibility.preferred_exists);
    condition_line(&mut out, task, "input robustness", &report.feasibility.input_robustness);
    out.push('\n');

    for (ic, inputs) in task.contract_inputs().iter().enumerate() {
        let _ = writeln!(out, "Execution function from {inputs}");
        for table in report.xi.iter().filter(|t| t.contract_inputs == ic) {
            xi_block(&mut out, report, table);
        }
        out.push('\n');
    }

    let all = task.all_parties();
    out.push_str("Compliant utilities\n");
    for table in report.xi.iter().filter(|t| t.compliance == all) {
        for &o in table.outcomes.keys() {
            for ip in 0..task.party_inputs().len() {
                let _ = writeln!(
                    out,
                    "  {} -> {}  {}",
                    task.contract_inputs()[table.contract_inputs],
                    task.outputs()[o],
                    utilities_label(task, Cell::new(ip, table.contract_inputs, o))
                );
            }
        }
    }
    out.push('\n');

    for n in &report.notes {
        let _ = writeln!(out, "note: {n}");
    }
    if !report.notes.is_empty() {
        out.push('\n');
    }
    for v in &report.verdicts {
        verdict_block(&mut out, report, v);
    }
    out
}

fn witness_json(w: &Witness) -> Json {
    serde_json::to_value(w).expect("witnesses serialise")
}

fn strings<T: ToString>(items: impl IntoIterator<Item = T>) -> Vec<String> {
    items.into_iter().map(|x| x.to_string()).collect()
}

/// One JSON object per line: header, feasibility, one `xi` record per table,
/// one `verdict` per property, then a summary. Keys are sorted, so equal
/// reports give byte-identical output.
pub fn render_machine(report: &Report) -> String {
    let task = &report.task;
    let mut records = Vec::new();
    records.push(json!({
        "record": "header",
        "scenario": report.scenario,
        "parties": task.parties(),
        "contracts": task.contracts(),
        "delta": report.delta,
        "horizon": report.horizon,
        "policies": strings(report.options.policies.iter().map(|p| p.as_str())),
        "exhaustive_order": report.options.exhaustive_order,
        "catalog": report.catalog_sizes,
        "joint": report.joint_entries,
    }));
    records.push(json!({
        "record": "feasibility",
        "pass": report.feasibility.passes(),
        "null_transition": report.feasibility.null_transition,
        "preferred_exists": report.feasibility.preferred_exists,
        "input_robustness": report.feasibility.input_robustness,
    }));
    for t in &report.xi {
        let outcomes: Vec<Json> = t
            .outcomes
            .iter()
            .map(|(&o, w)| {
                let utilities: Vec<Vec<String>> = (0..task.party_inputs().len())
                    .map(|ip| strings(task.utilities(Cell::new(ip, t.contract_inputs, o)).unwrap_or_default()))
                    .collect();
                json!({
                    "outcome": task.outputs()[o].0,
                    "utilities": utilities,
                    "witness": witness_json(w),
                })
            })
            .collect();
        records.push(json!({
            "record": "xi",
            "contract_inputs": task.contract_inputs()[t.contract_inputs].0,
            "compliance": strings(t.compliance.iter().map(|p| &task.parties()[p.0])),
            "executions": t.executions,
            "outcomes": outcomes,
        }));
    }
    for v in &report.verdicts {
        let failure = v.failure.as_ref().map(|f| {
            json!({
                "reason": f.reason,
                "party_inputs": task.party_inputs()[f.party_inputs].0,
                "contract_inputs": task.contract_inputs()[f.witness.contract_inputs].0,
                "outcome": f.outcome.0,
                "utilities": strings(&f.utilities),
                "witness": witness_json(&f.witness),
                "baseline": f.baseline.as_ref().map(|(o, w)| json!({"outcome": o.0, "witness": witness_json(w)})),
                "trace": f.trace,
            })
        });
        records.push(json!({
            "record": "verdict",
            "property": v.property,
            "pass": v.pass,
            "vacuous": v.vacuous,
            "failure": failure,
        }));
    }
    records.push(json!({
        "record": "summary",
        "pass": report.passes(),
        "properties_pass": report.properties_pass(),
        "executions": report.executions(),
        "notes": report.notes,
    }));
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}
