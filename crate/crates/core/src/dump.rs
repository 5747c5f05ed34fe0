//! JSON artifacts for each pipeline stage. Rationals are written as `"p/q"`.

use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::Result;
use crate::lp::{DualSolution, FractionalSolution, LpSolution};
use crate::partition::{CloseFarPartition, PartitionedSolution};
use crate::rational::{self, Rational};
use crate::reduction::ReductionResult;
use crate::rounding::{Estimate, IntegralSolution};

fn r(v: &Rational) -> Value {
    Value::String(rational::format(v))
}

fn vec_r(v: &[Rational]) -> Value {
    Value::Array(v.iter().map(r).collect())
}

fn mat_r(m: &[Vec<Rational>]) -> Value {
    Value::Array(m.iter().map(|row| vec_r(row)).collect())
}

/// Primal, dual and cost split of an LP optimum.
pub fn lp_solution(sol: &LpSolution) -> Value {
    json!({
        "x": mat_r(&sol.primal.x),
        "y": vec_r(&sol.primal.y),
        "alpha": vec_r(&sol.dual.alpha),
        "beta": mat_r(&sol.dual.beta),
        "F_star": r(&sol.costs.facility_cost),
        "C_star": r(&sol.costs.connection_cost),
        "LP_star": r(&sol.costs.lp_value),
    })
}

#[derive(Deserialize)]
struct PrimalDual {
    #[serde(flatten)]
    primal: FractionalSolution,
    #[serde(flatten)]
    dual: DualSolution,
}

/// Reads back the `x`, `y`, `alpha`, `beta` keys of an LP solution dump.
pub fn parse_lp_solution(text: &str) -> Result<(FractionalSolution, DualSolution)> {
    let pd: PrimalDual = serde_json::from_str(text)?;
    Ok((pd.primal, pd.dual))
}

pub fn reduction(red: &ReductionResult) -> Value {
    json!({
        "integral_x": red.integral_x,
        "integral_y": red.integral_y,
        "integral_demand": red.integral_demand,
        "residual_demand": red.residual_demand,
        "residual_clients": red.residual_clients,
        "residual_x": mat_r(&red.residual_fractional.x),
        "residual_y": vec_r(&red.residual_fractional.y),
    })
}

pub fn partition(ps: &PartitionedSolution) -> Value {
    let facilities: Vec<Value> = ps
        .facilities
        .iter()
        .map(|f| {
            json!({
                "id": f.id,
                "site": f.site,
                "root_site": ps.instance.root_site(f.site),
                "split_from": f.split_from,
                "ybar": r(&f.ybar),
            })
        })
        .collect();
    let demands: Vec<Value> = ps
        .demands
        .iter()
        .map(|d| json!({"id": d.id, "client": d.client, "primary": d.primary, "assigned_to": d.assigned_to}))
        .collect();
    let xbar: Vec<Value> = ps
        .demands
        .iter()
        .flat_map(|d| {
            d.xbar
                .iter()
                .map(move |(mu, v)| json!([mu, d.id, rational::format(v)]))
        })
        .collect();
    json!({
        "facilities": facilities,
        "demands": demands,
        "primaries": ps.primaries,
        "xbar": xbar,
    })
}

pub fn close_far(cfp: &CloseFarPartition) -> Value {
    let mut v = partition(&cfp.base);
    v["gamma"] = r(&cfp.gamma);
    v["close"] = json!(cfp.close);
    v["far"] = json!(cfp.far);
    v
}

pub fn integral(sol: &IntegralSolution) -> Value {
    serde_json::to_value(sol).expect("integral solution serializes")
}

pub fn estimate(est: &Estimate) -> Value {
    json!({
        "trials": est.trials,
        "mean_cost": est.mean_cost,
        "mean_facility": est.mean_facility,
        "mean_connection": est.mean_connection,
        "se_cost": est.se_cost,
        "se_facility": est.se_facility,
        "se_connection": est.se_connection,
        "fraction_indirect": est.fraction_indirect,
        "min_cost": est.min_cost,
    })
}

pub fn to_pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes")
}
