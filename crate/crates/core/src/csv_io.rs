//! CSV emission: header row, '.' decimal separator, newline-terminated
//! records, floating values printed with 9 significant digits.

use crate::limit::{LimitChangeScope, LimitTrajectory};
use crate::micro::{ChangeScope, SwitchKind, Trajectory};
use crate::model::Regime;
use crate::order_flow::Country;
use crate::reinit::PriceDir;

/// Format with 9 significant digits, plain notation where reasonable.
pub fn fmt9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..9).contains(&mag) {
        let decimals = (8 - mag).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // Trim trailing zeros but keep at least one digit.
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t.is_empty() || t == "-" {
            "0".into()
        } else {
            t.to_string()
        }
    } else {
        format!("{x:.8e}")
    }
}

fn regime_tag(r: Regime) -> &'static str {
    match r {
        Regime::Active => "active",
        Regime::Inactive => "inactive",
    }
}

fn country_tag(c: Country) -> &'static str {
    match c {
        Country::F => "F",
        Country::G => "G",
    }
}

pub const TRAJECTORY_HEADER: &str = "t,q_bf,q_af,q_bg,q_ag,b_f,b_g,c,regime\n";

/// Event-engine trajectory in physical units.
pub fn trajectory_to_csv(traj: &Trajectory) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    for (k, s) in traj.states.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt9(k as f64 * traj.dt),
            fmt9(s.q[0] as f64 * traj.dv),
            fmt9(s.q[1] as f64 * traj.dv),
            fmt9(s.q[2] as f64 * traj.dv),
            fmt9(s.q[3] as f64 * traj.dv),
            fmt9(s.bid_ticks[0] as f64 * traj.tick),
            fmt9(s.bid_ticks[1] as f64 * traj.tick),
            fmt9(s.cap as f64 * traj.dv),
            regime_tag(s.regime),
        ));
    }
    out
}

/// Price changes and regime switches of an event-engine run.
pub fn events_to_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,event,scope,direction,z_f,z_g\n");
    for c in &traj.price_changes {
        let scope = match c.scope {
            ChangeScope::Shared => "shared",
            ChangeScope::Country(c) => country_tag(c),
        };
        let dir = match c.dir {
            PriceDir::Up => "up",
            PriceDir::Down => "down",
        };
        out.push_str(&format!(
            "{},price_change,{scope},{dir},,\n",
            fmt9(c.index as f64 * traj.dt)
        ));
    }
    for s in &traj.switches {
        match s.kind {
            SwitchKind::Decouple { z } => out.push_str(&format!(
                "{},decouple,,,{},{}\n",
                fmt9(s.index as f64 * traj.dt),
                z.z_f,
                z.z_g
            )),
            SwitchKind::Recouple => out.push_str(&format!(
                "{},recouple,,,,\n",
                fmt9(s.index as f64 * traj.dt)
            )),
        }
    }
    out
}

/// Limit-engine trajectory, same schema as the event engine.
pub fn limit_trajectory_to_csv(traj: &LimitTrajectory) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    for k in 0..traj.queues.len() {
        let q = traj.queues[k];
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt9(k as f64 * traj.grid_dt),
            fmt9(q[0]),
            fmt9(q[1]),
            fmt9(q[2]),
            fmt9(q[3]),
            fmt9(traj.bid_ticks[k][0] as f64 * traj.tick),
            fmt9(traj.bid_ticks[k][1] as f64 * traj.tick),
            fmt9(traj.capacity[k]),
            regime_tag(traj.regime[k]),
        ));
    }
    out
}

pub fn limit_events_to_csv(traj: &LimitTrajectory) -> String {
    let mut out = String::from("t,event,scope,direction,z_f,z_g\n");
    for c in &traj.changes {
        let scope = match c.scope {
            LimitChangeScope::Shared => "shared",
            LimitChangeScope::Country(c) => country_tag(c),
        };
        let dir = match c.dir {
            PriceDir::Up => "up",
            PriceDir::Down => "down",
        };
        out.push_str(&format!("{},price_change,{scope},{dir},,\n", fmt9(c.time)));
    }
    for s in &traj.switches {
        match s.z {
            Some(z) => out.push_str(&format!(
                "{},decouple,,,{},{}\n",
                fmt9(s.time),
                z[0],
                z[1]
            )),
            None => out.push_str(&format!("{},recouple,,,,\n", fmt9(s.time))),
        }
    }
    out
}
