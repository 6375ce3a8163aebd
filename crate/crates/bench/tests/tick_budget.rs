//! The tick loop must fit its period with room to spare.

use std::time::{Duration, Instant};

use hotbox_bench::DeskRig;
use hotbox_core::Side;

#[test]
fn p99_tick_under_ten_milliseconds() {
    let mut rig = DeskRig::new();
    for _ in 0..100 {
        rig.step();
    }
    let mut samples: Vec<Duration> = (0..2000)
        .map(|_| {
            let t = Instant::now();
            rig.step();
            t.elapsed()
        })
        .collect();
    samples.sort();
    let p99 = samples[samples.len() * 99 / 100];
    println!("p99 tick: {p99:?}, median {:?}", samples[samples.len() / 2]);
    assert!(p99 < Duration::from_millis(10), "p99 {p99:?}");
    // The workload is real: both arms engaged and three fixtures loaded.
    assert_eq!(rig.sim.fixtures().len(), 3);
    for side in Side::BOTH {
        assert!(rig.sim.controller(side).engaged());
    }
}
