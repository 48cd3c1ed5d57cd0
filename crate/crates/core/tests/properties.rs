use std::collections::BTreeMap;

use pcmsyn::crossbar::{ArrayGeometry, CrossbarState};
use pcmsyn::device::{CellState, DeviceParams, VariationSpec};
use pcmsyn::hopfield::{compute_threshold, max_recall_current, run_learning, run_learning_with_threshold, train_epoch, NetworkConfig, Pattern};
use pcmsyn::rng::Streams;
use proptest::prelude::*;
use proptest::sample::subsequence;

fn array(n: usize, cv: f64, seed: u64) -> CrossbarState {
    CrossbarState::build(ArrayGeometry::square(n), DeviceParams::default(), VariationSpec::new(cv).unwrap(), seed).unwrap()
}

/// Element-wise Eq. 1, written independently of the crossbar.
fn oracle_currents(a: &CrossbarState, firing: &[usize], v: f64) -> BTreeMap<usize, f64> {
    let n = a.geometry().rows;
    let mut out = BTreeMap::new();
    for i in 0..n {
        if firing.contains(&i) {
            continue;
        }
        let mut total = 0.0;
        for &j in firing {
            total += v / a.cell(j, i).resistance();
        }
        out.insert(i, total);
    }
    out
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Every `k`-subset of `0..n` without `skip`, brute force.
fn subsets(n: usize, k: usize, skip: usize) -> Vec<Vec<usize>> {
    let pool: Vec<usize> = (0..n).filter(|&j| j != skip).collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << pool.len()) {
        if mask.count_ones() as usize == k {
            out.push(pool.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &j)| j).collect());
        }
    }
    out
}

fn brute_force_max_current(r: &[Vec<f64>], k: usize, v: f64) -> f64 {
    let n = r.len();
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        for s in subsets(n, k, i) {
            let g: f64 = s.iter().map(|&j| 1.0 / r[j][i]).sum();
            best = best.max(v * g);
        }
    }
    best
}

fn firing_set(n: usize) -> impl Strategy<Value = Vec<usize>> {
    subsequence((0..n).collect::<Vec<_>>(), 0..=n)
}

fn sized_firing() -> impl Strategy<Value = (usize, Vec<usize>)> {
    (2usize..=10).prop_flat_map(|n| (Just(n), firing_set(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn currents_match_elementwise_sum((n, firing) in sized_firing(), cv in 0.0f64..1.0, seed: u64) {
        let a = array(n, cv, seed);
        let got = a.read_recall_currents(&firing, 0.1).unwrap();
        let want = oracle_currents(&a, &firing, 0.1);
        prop_assert_eq!(got.keys().collect::<Vec<_>>(), want.keys().collect::<Vec<_>>());
        for (i, w) in want {
            prop_assert!(rel_close(got[&i], w, 1e-12), "neuron {}: {} vs {}", i, got[&i], w);
        }
    }

    #[test]
    fn superposition_over_single_firings((n, firing) in sized_firing(), cv in 0.0f64..1.0, seed: u64) {
        let a = array(n, cv, seed);
        let joint = a.read_recall_currents(&firing, 0.1).unwrap();
        for (&i, &total) in &joint {
            let sum: f64 = firing.iter().map(|&j| a.read_recall_currents(&[j], 0.1).unwrap()[&i]).sum();
            prop_assert!(rel_close(total, sum, 1e-12), "neuron {}: {} vs {}", i, total, sum);
        }
    }

    #[test]
    fn doubling_read_voltage_doubles_currents((n, firing) in sized_firing(), seed: u64, v in 0.01f64..0.5) {
        let a = array(n, 0.4, seed);
        let base = a.read_recall_currents(&firing, v).unwrap();
        let doubled = a.read_recall_currents(&firing, 2.0 * v).unwrap();
        for (i, c) in base {
            prop_assert_eq!(doubled[&i], 2.0 * c);
        }
    }

    #[test]
    fn reads_leave_array_identical((n, firing) in sized_firing(), seed: u64, repeats in 1usize..20) {
        let a = array(n, 0.6, seed);
        let before = a.clone();
        for _ in 0..repeats {
            a.read_recall_currents(&firing, 0.1).unwrap();
            a.recall_read_energy(&firing, 0.1).unwrap();
        }
        prop_assert_eq!(a.cells(), before.cells());
    }

    #[test]
    fn update_touches_only_firing_intersections((n, firing) in sized_firing(), seed: u64) {
        let mut a = array(n, 0.6, seed);
        let before = a.clone();
        let out = a.apply_update_phase(&firing, &mut Streams::new(seed).stream("update")).unwrap();
        prop_assert_eq!(out.programmed.len(), firing.len() * firing.len());
        prop_assert_eq!(out.energy, (firing.len() * firing.len()) as f64 * a.params().e_prog);
        for w in 0..n {
            for b in 0..n {
                let hit = firing.contains(&w) && firing.contains(&b);
                prop_assert_eq!(out.programmed.contains(&(w, b)), hit);
                if !hit {
                    prop_assert_eq!(a.cell(w, b), before.cell(w, b));
                } else {
                    prop_assert_eq!(a.cell(w, b).pulses_since_reset(), before.cell(w, b).pulses_since_reset() + 1);
                }
            }
        }
    }

    #[test]
    fn noiseless_gradual_set_decreases_to_floor(log_r in (1.0e4f64).ln()..(2.0e7f64).ln(), pulses in 1usize..40) {
        let p = DeviceParams { sigma_c2c: 0.0, ..DeviceParams::default() };
        let v = VariationSpec::new(0.0).unwrap();
        let mut rng = Streams::new(0).stream("unused");
        let mut cell = CellState::new(&p, log_r.exp() / p.r_reset_median);
        cell.apply_full_reset(&p, &v, &mut rng).unwrap();
        for _ in 0..pulses {
            let before = cell.resistance();
            cell.apply_gradual_set(&p, &mut rng);
            let after = cell.resistance();
            prop_assert!(after >= p.r_set_floor);
            if before > p.r_set_floor {
                prop_assert!(after < before, "{} -> {}", before, after);
            } else {
                prop_assert_eq!(after, before);
            }
        }
    }

    #[test]
    fn read_current_is_pure(cv in 0.0f64..1.5, seed: u64, v in 0.0f64..0.5) {
        let a = array(2, cv, seed);
        let cell = *a.cell(0, 1);
        let first = cell.read_current(v);
        for _ in 0..5 {
            prop_assert_eq!(cell.read_current(v), first);
        }
        prop_assert_eq!(&cell, a.cell(0, 1));
        prop_assert_eq!(first, v / cell.resistance());
    }

    #[test]
    fn no_false_recall_in_any_epoch(seed: u64, cv in 0.0f64..0.9, c in 1.01f64..3.0, sigma in 0.0f64..0.2) {
        let device = DeviceParams { sigma_c2c: sigma, ..DeviceParams::calibrated() };
        let config = NetworkConfig { c_factor: c, max_epochs: 40, ..NetworkConfig::default() };
        let mut a = CrossbarState::build(ArrayGeometry::default(), device, VariationSpec::new(cv).unwrap(), seed).unwrap();
        let (p, m) = Pattern::first();
        let t = run_learning(&mut a, &p, m, &config, &mut Streams::new(seed).indexed("program", 1)).unwrap();
        for e in &t.epochs {
            prop_assert!(e.false_firings.is_empty(), "epoch {}: {:?}", e.epoch_index, e.false_firings);
        }
    }

    #[test]
    fn noiseless_missing_current_never_drops(seed: u64, cv in 0.0f64..0.9) {
        let device = DeviceParams { sigma_c2c: 0.0, ..DeviceParams::calibrated() };
        let config = NetworkConfig { max_epochs: 30, ..NetworkConfig::default() };
        let mut a = CrossbarState::build(ArrayGeometry::default(), device, VariationSpec::new(cv).unwrap(), seed).unwrap();
        let (p, m) = Pattern::first();
        let mut rng = Streams::new(seed).indexed("program", 1);
        let t = run_learning_with_threshold(&mut a, &p, m, f64::INFINITY, &config, &mut rng).unwrap();
        let cur = t.missing_currents();
        prop_assert_eq!(cur.len(), 30);
        for w in cur.windows(2) {
            prop_assert!(w[1] >= w[0], "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn epoch_recall_depends_only_on_array_state(seed: u64, cv in 0.0f64..0.9, epochs in 1usize..8) {
        let config = NetworkConfig::default();
        let mut a = CrossbarState::build(ArrayGeometry::default(), DeviceParams::calibrated(), VariationSpec::new(cv).unwrap(), seed).unwrap();
        let threshold = compute_threshold(&a.initial_resistances(), &config).unwrap();
        let (p, m) = Pattern::first();
        let partial = p.without(m).unwrap();
        let mut rng = Streams::new(seed).indexed("program", 1);
        for k in 1..=epochs {
            let mut snapshot = a.clone();
            let mut snapshot_rng = rng.clone();
            let r = train_epoch(&mut a, &p, &partial, threshold, &config, k, &mut rng).unwrap();
            snapshot.apply_update_phase(&p.on_set(), &mut snapshot_rng).unwrap();
            prop_assert_eq!(snapshot.cells(), a.cells());
            let fresh = snapshot.read_recall_currents(&partial.on_set(), config.v_read).unwrap();
            prop_assert_eq!(&r.recall_currents, &fresh);
        }
    }
}

/// Every square matrix size up to 8 and every subset size 2..=4.
#[test]
fn threshold_shortcut_equals_exhaustive_enumeration() {
    for n in 3..=8usize {
        for k in 2..=4usize {
            if k >= n {
                continue;
            }
            for seed in 0..25u64 {
                let r = array(n, 0.6, seed * 31 + n as u64).initial_resistances();
                let fast = max_recall_current(&r, k, 0.1).unwrap();
                let slow = brute_force_max_current(&r, k, 0.1);
                assert_eq!(fast, slow, "n={n} k={k} seed={seed}");
            }
        }
    }
}

#[test]
fn threshold_grows_with_variation() {
    let config = NetworkConfig::default();
    let median_threshold = |cv: f64| {
        let mut t: Vec<f64> = (0..50u64)
            .map(|s| compute_threshold(&array(10, cv, s).initial_resistances(), &config).unwrap())
            .collect();
        t.sort_by(f64::total_cmp);
        (t[24] + t[25]) / 2.0
    };
    assert!(median_threshold(0.60) > median_threshold(0.09));
}
