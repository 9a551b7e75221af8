//! Built-in task suites and the object/container vocabulary they draw from.

use crate::sim::{
    ContainerSpec, Goal, GoalTarget, Layout, ObjectSpec, Rect, TaskCategory, TaskSpec,
};

/// Object kinds that appear in generated demonstrations.
pub const DEMO_OBJECT_KINDS: &[&str] = &[
    "carrot",
    "corn",
    "hotdog",
    "red bottle",
    "hamburger",
    "eggplant",
    "pink toy",
    "blue cube",
    "green pepper",
    "yellow duck",
];

/// Object kinds held out of demonstration generation.
pub const OOD_OBJECT_KINDS: &[&str] = &["banana", "purple grape", "toy car"];

/// Kinds used for distractor objects.
pub const DISTRACTOR_KINDS: &[&str] = &["sponge", "spoon", "cup", "towel"];

pub const CONTAINER_KINDS: &[&str] = &["pot", "pan", "plate", "bowl", "basket"];

/// Every object kind known to the built-in suites.
pub fn object_vocabulary() -> Vec<&'static str> {
    DEMO_OBJECT_KINDS
        .iter()
        .chain(OOD_OBJECT_KINDS)
        .chain(DISTRACTOR_KINDS)
        .copied()
        .collect()
}

fn single_task(id: String, category: TaskCategory, object: &str, container: &str) -> TaskSpec {
    TaskSpec {
        id,
        category,
        instruction: format!("put the {object} in the {container}"),
        objects: vec![ObjectSpec {
            id: 1,
            kind: object.into(),
        }],
        containers: vec![ContainerSpec {
            id: 100,
            kind: container.into(),
        }],
        goals: vec![Goal {
            object: 1,
            target: GoalTarget::Container(100),
        }],
        distractors: vec![],
        layout: Layout::default(),
        seed: 0,
    }
}

/// Ten single-object pick-and-place tasks over the demonstration kinds.
pub fn single_suite() -> Vec<TaskSpec> {
    DEMO_OBJECT_KINDS
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let container = CONTAINER_KINDS[i % CONTAINER_KINDS.len()];
            single_task(
                format!("single-{:02}", i),
                TaskCategory::Single,
                k,
                container,
            )
        })
        .collect()
}

/// The single suite with two distractor objects added to every scene.
pub fn distractor_suite() -> Vec<TaskSpec> {
    single_suite()
        .into_iter()
        .enumerate()
        .map(|(i, mut t)| {
            t.id = t.id.replace("single", "distractor");
            t.category = TaskCategory::Distractor;
            for (j, id) in [2u32, 3].into_iter().enumerate() {
                let kind = DISTRACTOR_KINDS[(i + j) % DISTRACTOR_KINDS.len()];
                t.objects.push(ObjectSpec {
                    id,
                    kind: kind.into(),
                });
                t.distractors.push(id);
            }
            t
        })
        .collect()
}

fn multi_task(id: &str, a: &str, b: &str, container: &str) -> TaskSpec {
    TaskSpec {
        id: id.into(),
        category: TaskCategory::Multi,
        instruction: format!("put the {a} and the {b} in the {container}"),
        objects: vec![
            ObjectSpec {
                id: 1,
                kind: a.into(),
            },
            ObjectSpec {
                id: 2,
                kind: b.into(),
            },
        ],
        containers: vec![ContainerSpec {
            id: 100,
            kind: container.into(),
        }],
        goals: vec![
            Goal {
                object: 1,
                target: GoalTarget::Container(100),
            },
            Goal {
                object: 2,
                target: GoalTarget::Container(100),
            },
        ],
        distractors: vec![],
        layout: Layout::default(),
        seed: 0,
    }
}

pub fn multi_suite() -> Vec<TaskSpec> {
    vec![
        multi_task("multi-00", "red bottle", "hamburger", "pan"),
        multi_task("multi-01", "carrot", "hotdog", "pot"),
        multi_task("multi-02", "corn", "carrot", "pan"),
    ]
}

fn spatial_task(id: &str, object: &str, phrase: &str, region: Rect) -> TaskSpec {
    TaskSpec {
        id: id.into(),
        category: TaskCategory::Spatial,
        instruction: format!("put the {object} at the {phrase}"),
        objects: vec![ObjectSpec {
            id: 1,
            kind: object.into(),
        }],
        containers: vec![],
        goals: vec![Goal {
            object: 1,
            target: GoalTarget::Region(region),
        }],
        distractors: vec![],
        layout: Layout::default(),
        seed: 0,
    }
}

pub fn spatial_suite() -> Vec<TaskSpec> {
    vec![
        spatial_task(
            "spatial-00",
            "pink toy",
            "right corner",
            Rect {
                x0: 0.75,
                y0: 0.75,
                x1: 0.95,
                y1: 0.95,
            },
        ),
        spatial_task(
            "spatial-01",
            "blue cube",
            "right edge",
            Rect {
                x0: 0.8,
                y0: 0.4,
                x1: 0.95,
                y1: 0.6,
            },
        ),
        spatial_task(
            "spatial-02",
            "corn",
            "bottom right corner",
            Rect {
                x0: 0.75,
                y0: 0.05,
                x1: 0.95,
                y1: 0.25,
            },
        ),
    ]
}

pub fn ood_suite() -> Vec<TaskSpec> {
    OOD_OBJECT_KINDS
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let container = ["pot", "pot", "plate"][i % 3];
            single_task(format!("ood-{:02}", i), TaskCategory::Single, k, container)
        })
        .collect()
}

/// Tasks demonstrations are generated from: single, multi and spatial.
pub fn training_suite() -> Vec<TaskSpec> {
    let mut s = single_suite();
    s.extend(multi_suite());
    s.extend(spatial_suite());
    s
}

/// Nine tasks in three groups of three: multiple objects, unseen objects,
/// spatial placement.
pub fn table_suite() -> Vec<TaskSpec> {
    let mut s = multi_suite();
    s.extend(ood_suite());
    s.extend(spatial_suite());
    s
}

/// Row-group label used in reports; unseen-object tasks get their own group.
pub fn report_category(task: &TaskSpec) -> String {
    if task.id.starts_with("ood-") {
        "ood-object".into()
    } else {
        task.category.label().into()
    }
}

/// Looks up a built-in suite by name.
pub fn builtin(name: &str) -> Option<Vec<TaskSpec>> {
    Some(match name {
        "single" => single_suite(),
        "distractor" => distractor_suite(),
        "multi" => multi_suite(),
        "spatial" => spatial_suite(),
        "ood" => ood_suite(),
        "training" => training_suite(),
        "table" => table_suite(),
        _ => return None,
    })
}

pub const BUILTIN_SUITES: &[&str] = &[
    "single",
    "distractor",
    "multi",
    "spatial",
    "ood",
    "training",
    "table",
];
