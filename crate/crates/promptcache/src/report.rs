//! CSV tables and JSON documents written by the command-line tool.

use std::fmt::Write as _;

use promptcache_core::simcache::Sweep;
use promptcache_core::synth::ConvergenceRow;
use promptcache_core::{LossType, RocCurve};
use serde::Serialize;

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn roc_csv(roc: &RocCurve) -> String {
    let mut out = String::from("fpr,tpr\n");
    for p in &roc.points {
        writeln!(out, "{},{}", p.fpr, p.tpr).unwrap();
    }
    out
}

pub fn sweep_csv(sweep: &Sweep) -> String {
    let mut out = String::from("tau,efficiency,nCorrectHit,nFalseHit,nMiss\n");
    for r in &sweep.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.tau, r.efficiency, r.n_correct_hit, r.n_false_hit, r.n_miss
        )
        .unwrap();
    }
    out
}

pub fn synth_csv(rows: &[ConvergenceRow], loss: LossType, seed: u64) -> String {
    let mut out = String::from("N,mean_abs_error,loss_type,seed\n");
    for r in rows {
        writeln!(out, "{},{},{},{}", r.n, r.mean_abs_error, loss, seed).unwrap();
    }
    out
}
