//! Brute-force adjudication oracle sharing no geometry code with the
//! library, and a generator of random crossing cases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadsense_core::adjudicator::{CrossingCase, Trajectory, Verdict};
use roadsense_core::director::DifficultyState;
use roadsense_core::domain::{simulate_plan, AreaLayout, DrivingStyle, Point, ScenarioConfig, VehicleTimeline, TICK_HZ};

pub fn point_rect_distance(p: (f64, f64), lo: (f64, f64), hi: (f64, f64)) -> f64 {
    let dx = (lo.0 - p.0).max(0.0).max(p.0 - hi.0);
    let dy = (lo.1 - p.1).max(0.0).max(p.1 - hi.1);
    (dx * dx + dy * dy).sqrt()
}

pub fn oracle_safe(layout: &AreaLayout, p: (f64, f64)) -> bool {
    let mut best: Option<&str> = None;
    let mut safe = false;
    for a in &layout.areas {
        let r = a.rect;
        if p.0 >= r.x0 && p.0 <= r.x1 && p.1 >= r.y0 && p.1 <= r.y1 && best.is_none_or(|b| a.id.as_str() < b) {
            best = Some(&a.id);
            safe = a.is_safe;
        }
    }
    safe
}

/// (verdict, tick, marginal)
pub fn oracle(layout: &AreaLayout, traj: &[(f64, f64)], start: u64, v: &VehicleTimeline) -> (Verdict, u64, bool) {
    let b = layout.bounds;
    let clamp = |p: (f64, f64)| (p.0.clamp(b.x0, b.x1), p.1.clamp(b.y0, b.y1));
    let pos = |t: u64| clamp(traj[(t - start) as usize]);
    let sign = if v.lane.heading >= 0 { 1.0 } else { -1.0 };
    for (k, d) in v.distances.iter().enumerate() {
        let t = v.spawn_tick + k as u64;
        let front = v.lane.crosswalk_near_x - sign * d;
        let tail = front - sign * v.size.length;
        let lo = (front.min(tail), v.lane.center_y - v.size.width / 2.0);
        let hi = (front.max(tail), v.lane.center_y + v.size.width / 2.0);
        if point_rect_distance(pos(t), lo, hi) < 0.5 {
            return (Verdict::Incorrect, t, false);
        }
    }
    let leave = v.spawn_tick + v.distances.len() as u64 - 1;
    (Verdict::Correct, leave, !oracle_safe(layout, pos(leave)))
}

pub fn random_case(rng: &mut ChaCha8Rng, sc: &ScenarioConfig) -> (Vec<(f64, f64)>, u64, VehicleTimeline) {
    let style = DrivingStyle::ALL[rng.gen_range(0..4)];
    let lane = sc.road.lanes[rng.gen_range(0..sc.road.lanes.len())].clone();
    let diff = DifficultyState::new(rng.gen_range(0..=3), rng.gen_range(1..=3)).unwrap();
    let plan = sc.speed_tables.template(style, diff);
    let distances = simulate_plan(&plan, &lane, sc.road.vehicle, TICK_HZ);
    let spawn_tick = rng.gen_range(0..60);
    let v = VehicleTimeline {
        vehicle_id: 1,
        trial_id: 1,
        style,
        lane,
        size: sc.road.vehicle,
        spawn_tick,
        distances,
        gesture: None,
        lying: false,
    };
    let start = rng.gen_range(0..=spawn_tick);
    let len = (v.car_leaving_tick() - start + 1 + rng.gen_range(0..30)) as usize;
    let b = sc.layout.bounds;
    let mut p = (rng.gen_range(b.x0 - 0.5..b.x1 + 0.5), rng.gen_range(b.y0 - 0.5..b.y1 + 0.5));
    let kind = rng.gen_range(0..4);
    // crossing walkers start on a sidewalk and head for the other one
    let (vx, vy) = match kind {
        0 => (0.0, 0.0),
        1 => {
            p = (rng.gen_range(2.0..12.0), rng.gen_range(0.2..1.8));
            (0.0, rng.gen_range(0.5..2.0) / TICK_HZ as f64)
        }
        2 => {
            p = (rng.gen_range(2.0..12.0), rng.gen_range(6.2..7.8));
            (0.0, -rng.gen_range(0.5..2.0) / TICK_HZ as f64)
        }
        _ => (0.0, 0.0),
    };
    let wait = rng.gen_range(0..len);
    let mut traj = Vec::with_capacity(len);
    for k in 0..len {
        traj.push(p);
        if kind == 3 {
            p.0 += rng.gen_range(-0.08..0.08);
            p.1 += rng.gen_range(-0.08..0.08);
        } else if k >= wait {
            p.0 += vx;
            p.1 += vy;
        }
    }
    (traj, start, v)
}

/// A case plus the oracle's (verdict, tick, marginal).
pub fn oracle_cases(n: usize, seed: u64, sc: &ScenarioConfig) -> Vec<(CrossingCase, (Verdict, u64, bool))> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (traj, start, v) = random_case(&mut rng, sc);
            let want = oracle(&sc.layout, &traj, start, &v);
            let trajectory = Trajectory::new(start, traj.iter().map(|&(x, y)| Point::new(x, y)).collect());
            (CrossingCase { trajectory, vehicle: v }, want)
        })
        .collect()
}
