//! Deterministic toy tabletop: a point gripper in the unit cube, flat
//! objects on the table, and rectangular container regions.
//!
//! The environment is a value. [`step`] takes a state and an action and
//! returns the next state; nothing else is mutated, so episodes are
//! independent and replayable from `(task, actions)`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dynamics and controller constants.
pub mod params {
    /// Per-axis translation clip applied to every action.
    pub const DELTA_CLIP: f64 = 0.05;
    /// Horizontal distance within which closing the gripper grasps an object.
    pub const GRASP_RADIUS: f64 = 0.04;
    /// Maximum gripper height at which a grasp can happen.
    pub const GRASP_HEIGHT: f64 = 0.1;
    /// Grip command at or above this value closes the gripper.
    pub const GRIP_THRESHOLD: f64 = 0.5;
    pub const START: [f64; 3] = [0.5, 0.1, 0.6];
    pub const MAX_STEPS: u32 = 200;
    pub const OBJECT_RADIUS: f64 = 0.03;
    /// Minimum center distance between objects at reset.
    pub const MIN_OBJECT_SEPARATION: f64 = 0.12;
    pub const CONTAINER_HALF: f64 = 0.1;

    /// Expert heights: grasp, release and travel.
    pub const EXPERT_GRASP_Z: f64 = 0.05;
    pub const EXPERT_RELEASE_Z: f64 = 0.1;
    pub const EXPERT_TRAVEL_Z: f64 = 0.3;
    pub const EXPERT_TOLERANCE: f64 = 0.01;
}

use params::*;

pub const ACTION_DIM: usize = 7;

/// `(dx, dy, dz, droll, dpitch, dyaw, grip)`. Rotations are carried but inert.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvAction(pub [f64; ACTION_DIM]);

impl EnvAction {
    pub const ZERO: EnvAction = EnvAction([0.0; ACTION_DIM]);

    pub fn translation(dx: f64, dy: f64, dz: f64, grip: f64) -> Self {
        EnvAction([dx, dy, dz, 0.0, 0.0, 0.0, grip])
    }

    /// Takes the first seven entries of a slice; missing entries are zero.
    pub fn from_slice(v: &[f64]) -> Self {
        let mut a = [0.0; ACTION_DIM];
        for (dst, src) in a.iter_mut().zip(v) {
            *dst = *src;
        }
        EnvAction(a)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn grip(&self) -> f64 {
        self.0[6]
    }
}

/// Axis-aligned rectangle on the table, bounds inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn centered(cx: f64, cy: f64, half: f64) -> Self {
        Rect {
            x0: cx - half,
            y0: cy - half,
            x1: cx + half,
            y1: cy + half,
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (self.x0..=self.x1).contains(&p[0]) && (self.y0..=self.y1).contains(&p[1])
    }

    pub fn center(&self) -> [f64; 2] {
        [(self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0]
    }

    fn inflate(&self, m: f64) -> Rect {
        Rect {
            x0: self.x0 - m,
            y0: self.y0 - m,
            x1: self.x1 + m,
            y1: self.y1 + m,
        }
    }

    fn is_valid(&self) -> bool {
        [self.x0, self.y0, self.x1, self.y1]
            .iter()
            .all(|v| v.is_finite())
            && self.x0 < self.x1
            && self.y0 < self.y1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u32,
    pub kind: String,
    pub pos: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Container {
    pub id: u32,
    pub kind: String,
    pub region: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub gripper: [f64; 3],
    pub gripper_closed: bool,
    pub held: Option<u32>,
    /// Scene order; observations list objects in this order.
    pub objects: Vec<SceneObject>,
    pub containers: Vec<Container>,
    pub step_count: u32,
    pub out_of_bounds: bool,
}

impl EnvState {
    pub fn object(&self, id: u32) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn container(&self, id: u32) -> Option<&Container> {
        self.containers.iter().find(|c| c.id == id)
    }

    /// Short SHA-256 digest of the serialized state, for rollout logs.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("state serializes");
        crate::sha256_hex(json.as_bytes())[..16].to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskCategory {
    Single,
    Multi,
    Spatial,
    Distractor,
}

impl TaskCategory {
    pub fn label(self) -> &'static str {
        match self {
            TaskCategory::Single => "single",
            TaskCategory::Multi => "multi",
            TaskCategory::Spatial => "spatial",
            TaskCategory::Distractor => "distractor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: u32,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerSpec {
    pub id: u32,
    pub kind: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GoalTarget {
    Container(u32),
    Region(Rect),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub object: u32,
    pub target: GoalTarget,
}

/// Placement area for the reset layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    /// Objects are sampled uniformly inside this rectangle.
    pub objects: Rect,
    /// Container centers are sampled uniformly inside this rectangle.
    pub containers: Rect,
}

impl Default for Layout {
    fn default() -> Self {
        Layout {
            objects: Rect {
                x0: 0.15,
                y0: 0.2,
                x1: 0.55,
                y1: 0.8,
            },
            containers: Rect {
                x0: 0.65,
                y0: 0.3,
                x1: 0.8,
                y1: 0.7,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub category: TaskCategory,
    pub instruction: String,
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub containers: Vec<ContainerSpec>,
    pub goals: Vec<Goal>,
    #[serde(default)]
    pub distractors: Vec<u32>,
    #[serde(default)]
    pub layout: Layout,
    pub seed: u64,
}

impl TaskSpec {
    pub fn with_seed(&self, seed: u64) -> TaskSpec {
        TaskSpec {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |m: String| {
            Err(SimError::InvalidTask {
                task: self.id.clone(),
                message: m,
            })
        };
        if self.goals.is_empty() {
            return invalid("task has no goals".into());
        }
        let mut ids: Vec<u32> = self.objects.iter().map(|o| o.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return invalid("duplicate object id".into());
        }
        for g in &self.goals {
            if !ids.contains(&g.object) {
                return invalid(format!("goal object {} does not exist", g.object));
            }
            match g.target {
                GoalTarget::Container(c) if !self.containers.iter().any(|s| s.id == c) => {
                    return invalid(format!("goal container {c} does not exist"));
                }
                GoalTarget::Region(r) if !r.is_valid() => {
                    return invalid("goal region is empty".into())
                }
                _ => {}
            }
        }
        for d in &self.distractors {
            if !ids.contains(d) {
                return invalid(format!("distractor {d} does not exist"));
            }
            if self.goals.iter().any(|g| g.object == *d) {
                return invalid(format!("distractor {d} is also a goal object"));
            }
        }
        if !self.layout.objects.is_valid() || !self.layout.containers.is_valid() {
            return invalid("layout rectangles are empty".into());
        }
        Ok(())
    }

    /// Target rectangle of a goal in a given state.
    pub fn target_region(&self, goal: &Goal, state: &EnvState) -> Option<Rect> {
        match goal.target {
            GoalTarget::Container(c) => state.container(c).map(|c| c.region),
            GoalTarget::Region(r) => Some(r),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("task {task}: {message}")]
    InvalidTask { task: String, message: String },
    #[error("task {task}: could not place all objects without overlap")]
    Placement { task: String },
}

/// Deterministic initial layout from the task seed. The gripper starts open
/// at [`params::START`].
pub fn reset(task: &TaskSpec) -> Result<EnvState, SimError> {
    task.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(task.seed);
    let layout = task.layout;

    let containers: Vec<Container> = task
        .containers
        .iter()
        .map(|c| {
            let cx = rng.gen_range(layout.containers.x0..=layout.containers.x1);
            let cy = rng.gen_range(layout.containers.y0..=layout.containers.y1);
            Container {
                id: c.id,
                kind: c.kind.clone(),
                region: Rect::centered(cx, cy, CONTAINER_HALF),
            }
        })
        .collect();
    let mut keep_out: Vec<Rect> = containers.iter().map(|c| c.region).collect();
    keep_out.extend(task.goals.iter().filter_map(|g| match g.target {
        GoalTarget::Region(r) => Some(r),
        GoalTarget::Container(_) => None,
    }));

    let mut objects: Vec<SceneObject> = Vec::with_capacity(task.objects.len());
    for spec in &task.objects {
        let mut placed = None;
        for _ in 0..1000 {
            let p = [
                rng.gen_range(layout.objects.x0..=layout.objects.x1),
                rng.gen_range(layout.objects.y0..=layout.objects.y1),
            ];
            let clear_of_regions = keep_out
                .iter()
                .all(|r| !r.inflate(OBJECT_RADIUS).contains(p));
            let clear_of_objects = objects
                .iter()
                .all(|o| (o.pos[0] - p[0]).hypot(o.pos[1] - p[1]) >= MIN_OBJECT_SEPARATION);
            if clear_of_regions && clear_of_objects {
                placed = Some(p);
                break;
            }
        }
        let pos = placed.ok_or_else(|| SimError::Placement {
            task: task.id.clone(),
        })?;
        objects.push(SceneObject {
            id: spec.id,
            kind: spec.kind.clone(),
            pos,
            radius: OBJECT_RADIUS,
        });
    }
    if !task.distractors.is_empty() {
        objects.shuffle(&mut rng);
    }

    Ok(EnvState {
        gripper: START,
        gripper_closed: false,
        held: None,
        objects,
        containers,
        step_count: 0,
        out_of_bounds: false,
    })
}

/// Advances the state by one action.
///
/// Translation is clipped per axis to [`params::DELTA_CLIP`] and integrated.
/// A commanded position outside the unit cube sets `out_of_bounds`, after
/// which the state only counts steps. Closing the gripper grasps the nearest
/// object within [`params::GRASP_RADIUS`] when the gripper is at or below
/// [`params::GRASP_HEIGHT`]; opening releases the held object in place.
pub fn step(state: &EnvState, action: &EnvAction) -> EnvState {
    let mut next = state.clone();
    next.step_count += 1;
    if state.out_of_bounds {
        return next;
    }
    let a = action.0;
    if !a.iter().all(|v| v.is_finite()) {
        next.out_of_bounds = true;
        return next;
    }
    let mut target = state.gripper;
    for (p, d) in target.iter_mut().zip(&a[..3]) {
        *p += d.clamp(-DELTA_CLIP, DELTA_CLIP);
    }
    if target.iter().any(|v| !(0.0..=1.0).contains(v)) {
        next.out_of_bounds = true;
        next.gripper = target.map(|v| v.clamp(0.0, 1.0));
        return next;
    }
    next.gripper = target;
    let [gx, gy, gz] = target;

    let close = a[6] >= GRIP_THRESHOLD;
    if close && !state.gripper_closed {
        next.gripper_closed = true;
        if next.held.is_none() && gz <= GRASP_HEIGHT {
            next.held = next
                .objects
                .iter()
                .map(|o| (o.id, (o.pos[0] - gx).hypot(o.pos[1] - gy)))
                .filter(|&(_, d)| d <= GRASP_RADIUS)
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(id, _)| id);
        }
    } else if !close && state.gripper_closed {
        next.gripper_closed = false;
        next.held = None;
    }
    if let Some(id) = next.held {
        if let Some(o) = next.objects.iter_mut().find(|o| o.id == id) {
            o.pos = [gx, gy];
        }
    }
    next
}

fn goal_satisfied(state: &EnvState, task: &TaskSpec, goal: &Goal) -> bool {
    let Some(obj) = state.object(goal.object) else {
        return false;
    };
    state.held != Some(goal.object)
        && task
            .target_region(goal, state)
            .is_some_and(|r| r.contains(obj.pos))
}

/// All goal objects rest inside their targets and the gripper never left the workspace.
pub fn is_success(state: &EnvState, task: &TaskSpec) -> bool {
    !state.out_of_bounds && task.goals.iter().all(|g| goal_satisfied(state, task, g))
}

fn toward(from: f64, to: f64) -> f64 {
    (to - from).clamp(-DELTA_CLIP, DELTA_CLIP)
}

/// Scripted controller: for each unsatisfied goal in order, move above the
/// object, descend, close, lift, move above the target, descend, open.
pub fn scripted_expert(state: &EnvState, task: &TaskSpec) -> EnvAction {
    let [gx, gy, gz] = state.gripper;
    let Some(goal) = task.goals.iter().find(|g| !goal_satisfied(state, task, g)) else {
        return EnvAction::ZERO;
    };
    if state.out_of_bounds {
        return EnvAction::ZERO;
    }
    let near = |p: [f64; 2]| {
        (p[0] - gx).abs() <= EXPERT_TOLERANCE && (p[1] - gy).abs() <= EXPERT_TOLERANCE
    };

    match state.held {
        Some(id) if id == goal.object => {
            let Some(region) = task.target_region(goal, state) else {
                return EnvAction::ZERO;
            };
            let c = region.center();
            if !near(c) {
                if gz < EXPERT_TRAVEL_Z {
                    return EnvAction::translation(0.0, 0.0, toward(gz, EXPERT_TRAVEL_Z), 1.0);
                }
                return EnvAction::translation(toward(gx, c[0]), toward(gy, c[1]), 0.0, 1.0);
            }
            if gz > EXPERT_RELEASE_Z + EXPERT_TOLERANCE {
                return EnvAction::translation(0.0, 0.0, toward(gz, EXPERT_RELEASE_Z), 1.0);
            }
            EnvAction::translation(0.0, 0.0, 0.0, 0.0)
        }
        Some(_) => EnvAction::translation(0.0, 0.0, 0.0, 0.0),
        None => {
            if state.gripper_closed {
                return EnvAction::translation(0.0, 0.0, 0.0, 0.0);
            }
            let Some(obj) = state.object(goal.object) else {
                return EnvAction::ZERO;
            };
            if !near(obj.pos) {
                if gz < EXPERT_TRAVEL_Z {
                    return EnvAction::translation(0.0, 0.0, toward(gz, EXPERT_TRAVEL_Z), 0.0);
                }
                return EnvAction::translation(
                    toward(gx, obj.pos[0]),
                    toward(gy, obj.pos[1]),
                    0.0,
                    0.0,
                );
            }
            if gz > EXPERT_GRASP_Z + EXPERT_TOLERANCE {
                return EnvAction::translation(0.0, 0.0, toward(gz, EXPERT_GRASP_Z), 0.0);
            }
            EnvAction::translation(0.0, 0.0, 0.0, 1.0)
        }
    }
}

/// Rolls the expert out from reset until success or the step limit.
pub fn expert_rollout(
    task: &TaskSpec,
    max_steps: u32,
) -> Result<Vec<(EnvState, EnvAction)>, SimError> {
    let mut state = reset(task)?;
    let mut out = Vec::new();
    while !is_success(&state, task) && state.step_count < max_steps {
        let a = scripted_expert(&state, task);
        let next = step(&state, &a);
        out.push((state, a));
        state = next;
    }
    out.push((state, EnvAction::ZERO));
    Ok(out)
}

/// One step of a rollout log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: u32,
    /// Digest of the state the action was applied to.
    pub state: String,
    pub action: [f64; ACTION_DIM],
    pub success: bool,
    pub out_of_bounds: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(seed: u64) -> TaskSpec {
        TaskSpec {
            id: "single-carrot".into(),
            category: TaskCategory::Single,
            instruction: "put the carrot in the pot".into(),
            objects: vec![ObjectSpec {
                id: 1,
                kind: "carrot".into(),
            }],
            containers: vec![ContainerSpec {
                id: 10,
                kind: "pot".into(),
            }],
            goals: vec![Goal {
                object: 1,
                target: GoalTarget::Container(10),
            }],
            distractors: vec![],
            layout: Layout::default(),
            seed,
        }
    }

    fn multi(seed: u64) -> TaskSpec {
        TaskSpec {
            id: "multi".into(),
            category: TaskCategory::Multi,
            instruction: "put the red bottle and the hamburger in the pan".into(),
            objects: vec![
                ObjectSpec {
                    id: 1,
                    kind: "red bottle".into(),
                },
                ObjectSpec {
                    id: 2,
                    kind: "hamburger".into(),
                },
            ],
            containers: vec![ContainerSpec {
                id: 10,
                kind: "pan".into(),
            }],
            goals: vec![
                Goal {
                    object: 1,
                    target: GoalTarget::Container(10),
                },
                Goal {
                    object: 2,
                    target: GoalTarget::Container(10),
                },
            ],
            distractors: vec![],
            layout: Layout::default(),
            seed,
        }
    }

    fn bare_state() -> EnvState {
        EnvState {
            gripper: [0.5, 0.5, 0.05],
            gripper_closed: false,
            held: None,
            objects: vec![SceneObject {
                id: 1,
                kind: "cube".into(),
                pos: [0.53, 0.5],
                radius: 0.03,
            }],
            containers: vec![Container {
                id: 10,
                kind: "pot".into(),
                region: Rect::centered(0.8, 0.5, 0.1),
            }],
            step_count: 0,
            out_of_bounds: false,
        }
    }

    #[test]
    fn reset_is_deterministic_and_well_formed() {
        assert_eq!(reset(&single(3)).unwrap(), reset(&single(3)).unwrap());
        assert_ne!(reset(&single(3)).unwrap(), reset(&single(4)).unwrap());
        let s = reset(&multi(5)).unwrap();
        assert_eq!(s.objects.len(), 2);
        assert_eq!(s.containers.len(), 1);
        assert_eq!(s.gripper, START);
        assert!(!s.gripper_closed && s.held.is_none());
    }

    #[test]
    fn distractor_scene_holds_extra_objects() {
        let mut t = single(9);
        t.category = TaskCategory::Distractor;
        t.objects.push(ObjectSpec {
            id: 2,
            kind: "sponge".into(),
        });
        t.objects.push(ObjectSpec {
            id: 3,
            kind: "spoon".into(),
        });
        t.distractors = vec![2, 3];
        let s = reset(&t).unwrap();
        assert!(s.objects.len() >= 3);
        t.distractors = vec![1];
        assert!(matches!(reset(&t), Err(SimError::InvalidTask { .. })));
    }

    #[test]
    fn grasp_within_radius() {
        let s = step(&bare_state(), &EnvAction::translation(0.0, 0.0, 0.0, 1.0));
        assert_eq!(s.held, Some(1));
        let mut far = bare_state();
        far.objects[0].pos = [0.55, 0.5];
        assert_eq!(
            step(&far, &EnvAction::translation(0.0, 0.0, 0.0, 1.0)).held,
            None
        );
        let mut high = bare_state();
        high.gripper[2] = 0.2;
        assert_eq!(
            step(&high, &EnvAction::translation(0.0, 0.0, 0.0, 1.0)).held,
            None
        );
    }

    #[test]
    fn held_object_follows_and_releases_in_container() {
        let mut s = step(&bare_state(), &EnvAction::translation(0.0, 0.0, 0.0, 1.0));
        for _ in 0..6 {
            s = step(&s, &EnvAction::translation(0.05, 0.0, 0.0, 1.0));
            assert_eq!(s.objects[0].pos, [s.gripper[0], s.gripper[1]]);
        }
        s = step(&s, &EnvAction::translation(0.0, 0.0, 0.0, 0.0));
        assert_eq!(s.held, None);
        assert!(s.containers[0].region.contains(s.objects[0].pos));
    }

    #[test]
    fn translation_is_clipped_and_bounds_are_enforced() {
        let mut s = bare_state();
        s.gripper = [0.9, 0.5, 0.5];
        let s1 = step(&s, &EnvAction::translation(1.0, 0.0, 0.0, 0.0));
        assert!((s1.gripper[0] - 0.95).abs() < 1e-12 && !s1.out_of_bounds);
        let mut s2 = s1.clone();
        for _ in 0..5 {
            s2 = step(&s2, &EnvAction::translation(0.3, 0.0, 0.0, 0.0));
        }
        assert!(s2.out_of_bounds);
        assert!(!is_success(&s2, &single(0)));
        let frozen = step(&s2, &EnvAction::translation(-0.05, 0.0, 0.0, 0.0));
        assert_eq!(frozen.gripper, s2.gripper);
        assert_eq!(frozen.step_count, s2.step_count + 1);
    }

    #[test]
    fn success_requires_every_goal() {
        let t = multi(1);
        let mut s = reset(&t).unwrap();
        let inside = s.containers[0].region.center();
        s.objects[0].pos = inside;
        assert!(!is_success(&s, &t));
        s.objects[1].pos = inside;
        assert!(is_success(&s, &t));
        s.out_of_bounds = true;
        assert!(!is_success(&s, &t));
    }

    #[test]
    fn expert_solves_single_tasks_within_budget() {
        for seed in 0..200 {
            let t = single(seed);
            let roll = expert_rollout(&t, MAX_STEPS).unwrap();
            let last = &roll.last().unwrap().0;
            assert!(is_success(last, &t), "seed {seed}");
            assert!(roll.iter().all(|(s, _)| !s.out_of_bounds));
            let steps = roll.len() - 1;
            assert!((30..=80).contains(&steps), "seed {seed}: {steps} steps");
            for (_, a) in &roll {
                assert!(a.0[..3].iter().all(|d| d.abs() <= DELTA_CLIP));
            }
        }
    }

    #[test]
    fn expert_pursues_goals_in_order() {
        let t = multi(2);
        let roll = expert_rollout(&t, MAX_STEPS).unwrap();
        assert!(is_success(&roll.last().unwrap().0, &t));
        let first_grasp = roll.iter().find_map(|(s, _)| s.held).unwrap();
        assert_eq!(first_grasp, 1);
    }

    #[test]
    fn expert_idles_after_success() {
        let t = single(7);
        let roll = expert_rollout(&t, MAX_STEPS).unwrap();
        let done = &roll.last().unwrap().0;
        assert_eq!(scripted_expert(done, &t), EnvAction::ZERO);
    }

    #[test]
    fn replay_is_bit_exact() {
        let t = single(11);
        let roll = expert_rollout(&t, MAX_STEPS).unwrap();
        let mut s = reset(&t).unwrap();
        for (expected, a) in &roll[..roll.len() - 1] {
            assert_eq!(&s, expected);
            s = step(&s, a);
        }
        assert_eq!(&s, &roll.last().unwrap().0);
    }
}
