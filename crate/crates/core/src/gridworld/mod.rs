//! Deterministic pickup gridworld.
//!
//! The world is a rectangular interior of free cells surrounded by an implicit
//! wall. Objects occupy cells and block movement. An episode ends when the
//! agent picks up an object or when the step limit is reached.

mod dp;
mod env;
mod snapshot;

pub use dp::{solve_episode_dp, DpTable};
pub use env::{extended_reward, reset, transition, StepOutcome};
pub use snapshot::{LayoutSnapshot, ObjectSnapshot, PoseSnapshot};

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::EnvError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Red,
    Purple,
    Grey,
    Green,
    Yellow,
    Blue,
}

impl Color {
    pub const ALL: [Color; 6] = [
        Color::Red,
        Color::Purple,
        Color::Grey,
        Color::Green,
        Color::Yellow,
        Color::Blue,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Purple => "purple",
            Color::Grey => "grey",
            Color::Green => "green",
            Color::Yellow => "yellow",
            Color::Blue => "blue",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Key,
    Ball,
    Box,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Key, Shape::Ball, Shape::Box];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Key => "key",
            Shape::Ball => "ball",
            Shape::Box => "box",
        }
    }
}

/// One of the 18 object identities. Ordering is color-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub color: Color,
    pub shape: Shape,
}

pub type GoalId = ObjectSpec;

impl ObjectSpec {
    pub const COUNT: usize = 18;

    pub const fn new(color: Color, shape: Shape) -> Self {
        Self { color, shape }
    }

    pub fn index(self) -> usize {
        self.color as usize * 3 + self.shape as usize
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < Self::COUNT, "object index {index} out of range");
        Self {
            color: Color::ALL[index / 3],
            shape: Shape::ALL[index % 3],
        }
    }

    pub fn all() -> impl Iterator<Item = ObjectSpec> {
        (0..Self::COUNT).map(Self::from_index)
    }

    pub fn satisfies(self, attribute: Attribute) -> bool {
        match attribute {
            Attribute::Color(c) => self.color == c,
            Attribute::Shape(s) => self.shape == s,
        }
    }
}

impl fmt::Display for ObjectSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.color.name(), self.shape.name())
    }
}

/// One of the nine basis attributes: six colors and three shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Attribute {
    Color(Color),
    Shape(Shape),
}

pub type AttributeId = Attribute;

impl Attribute {
    pub const COUNT: usize = 9;

    pub fn index(self) -> usize {
        match self {
            Attribute::Color(c) => c as usize,
            Attribute::Shape(s) => 6 + s as usize,
        }
    }

    pub fn from_index(index: usize) -> Self {
        match index {
            0..=5 => Attribute::Color(Color::ALL[index]),
            6..=8 => Attribute::Shape(Shape::ALL[index - 6]),
            _ => panic!("attribute index {index} out of range"),
        }
    }

    pub fn all() -> impl Iterator<Item = Attribute> {
        (0..Self::COUNT).map(Self::from_index)
    }

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Color(c) => c.name(),
            Attribute::Shape(s) => s.name(),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::all().find(|a| a.name() == name)
    }

    /// Objects carrying this attribute.
    pub fn objects(self) -> ObjectSet {
        ObjectSet::from_fn(|o| o.satisfies(self))
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A subset of the 18 object identities, stored as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct ObjectSet(u32);

impl ObjectSet {
    const MASK: u32 = (1 << ObjectSpec::COUNT) - 1;

    pub const fn empty() -> Self {
        ObjectSet(0)
    }

    pub const fn full() -> Self {
        ObjectSet(Self::MASK)
    }

    pub fn from_fn(mut pred: impl FnMut(ObjectSpec) -> bool) -> Self {
        ObjectSpec::all()
            .filter(|o| pred(*o))
            .fold(Self::empty(), |s, o| s.with(o))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn with(self, o: ObjectSpec) -> Self {
        ObjectSet(self.0 | 1 << o.index())
    }

    pub fn contains(self, o: ObjectSpec) -> bool {
        self.0 & (1 << o.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: Self) -> Self {
        ObjectSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        ObjectSet(self.0 & other.0)
    }

    pub fn complement(self) -> Self {
        ObjectSet(!self.0 & Self::MASK)
    }

    pub fn iter(self) -> impl Iterator<Item = ObjectSpec> {
        ObjectSpec::all().filter(move |o| self.contains(*o))
    }
}

impl FromIterator<ObjectSpec> for ObjectSet {
    fn from_iter<I: IntoIterator<Item = ObjectSpec>>(iter: I) -> Self {
        iter.into_iter().fold(Self::empty(), |s, o| s.with(o))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    TurnLeft,
    TurnRight,
    Forward,
    Pickup,
    Drop,
    Toggle,
    Done,
}

impl Action {
    /// Fixed enumeration order, also used for tie-breaking.
    pub const ALL: [Action; 7] = [
        Action::TurnLeft,
        Action::TurnRight,
        Action::Forward,
        Action::Pickup,
        Action::Drop,
        Action::Toggle,
        Action::Done,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dir {
    N,
    E,
    S,
    W,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::N, Dir::E, Dir::S, Dir::W];

    pub fn left(self) -> Dir {
        Dir::ALL[(self as usize + 3) % 4]
    }

    pub fn right(self) -> Dir {
        Dir::ALL[(self as usize + 1) % 4]
    }

    pub fn delta(self) -> (i32, i32) {
        match self {
            Dir::N => (0, -1),
            Dir::E => (1, 0),
            Dir::S => (0, 1),
            Dir::W => (-1, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub x: i32,
    pub y: i32,
}

impl Pos {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn step(self, dir: Dir) -> Pos {
        let (dx, dy) = dir.delta();
        Pos::new(self.x + dx, self.y + dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pose {
    pub pos: Pos,
    pub dir: Dir,
}

impl Pose {
    pub fn ahead(self) -> Pos {
        self.pos.step(self.dir)
    }

    /// Dense index over `width * height * 4` poses.
    pub fn index(self, width: i32) -> usize {
        ((self.pos.y * width + self.pos.x) * 4) as usize + self.dir as usize
    }

    pub fn from_index(index: usize, width: i32) -> Pose {
        let cell = (index / 4) as i32;
        Pose {
            pos: Pos::new(cell % width, cell / width),
            dir: Dir::ALL[index % 4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlacedObject {
    pub pos: Pos,
    pub spec: ObjectSpec,
}

/// Full symbolic state of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeState {
    pub width: i32,
    pub height: i32,
    pub agent: Pose,
    pub objects: Vec<PlacedObject>,
    pub picked: Option<ObjectSpec>,
    pub steps_elapsed: u32,
    pub step_limit: u32,
    /// Base reward charged for every step.
    pub step_penalty: f64,
}

impl EpisodeState {
    pub fn in_bounds(&self, p: Pos) -> bool {
        p.x >= 0 && p.y >= 0 && p.x < self.width && p.y < self.height
    }

    pub fn object_at(&self, p: Pos) -> Option<ObjectSpec> {
        self.objects.iter().find(|o| o.pos == p).map(|o| o.spec)
    }

    pub fn is_free(&self, p: Pos) -> bool {
        self.in_bounds(p) && self.object_at(p).is_none()
    }

    pub fn object_ahead(&self) -> Option<ObjectSpec> {
        self.object_at(self.agent.ahead())
    }

    pub fn is_terminal(&self) -> bool {
        self.picked.is_some() || self.steps_elapsed >= self.step_limit
    }

    /// Steps left before the episode times out.
    pub fn remaining(&self) -> u32 {
        self.step_limit.saturating_sub(self.steps_elapsed)
    }

    pub fn pose_count(&self) -> usize {
        (self.width * self.height * 4) as usize
    }

    /// Identities present in the layout.
    pub fn present(&self) -> ObjectSet {
        self.objects.iter().map(|o| o.spec).collect()
    }

    /// Same object layout, ignoring agent pose and episode progress.
    pub fn same_layout(&self, other: &EpisodeState) -> bool {
        self.width == other.width && self.height == other.height && self.objects == other.objects
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome, EnvError> {
        env::step(self, action)
    }
}

/// Environment parameters and reward constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub width: i32,
    pub height: i32,
    pub n_distractors: usize,
    pub step_limit: u32,
    pub step_penalty: f64,
    pub goal_reward: f64,
    pub wrong_goal_penalty: f64,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            width: 8,
            height: 8,
            n_distractors: 4,
            step_limit: 100,
            step_penalty: -0.1,
            goal_reward: 2.0,
            wrong_goal_penalty: -10.0,
            seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn with_grid(mut self, width: i32, height: i32) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn with_distractors(mut self, n: usize) -> Self {
        self.n_distractors = n;
        self
    }

    pub fn with_step_limit(mut self, limit: u32) -> Self {
        self.step_limit = limit;
        self
    }

    /// Reward the min task pays at a goal.
    pub fn min_task_reward(&self) -> f64 {
        0.0
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |msg: String| Err(EnvError::Config(msg));
        if self.width < 1 || self.height < 1 {
            return bad(format!("grid {}x{} has no cells", self.width, self.height));
        }
        if self.step_limit == 0 {
            return bad("step_limit must be positive".into());
        }
        // negated so NaN is rejected too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.step_penalty < 0.0) {
            return bad(format!("step_penalty {} must be negative", self.step_penalty));
        }
        if !(self.wrong_goal_penalty < self.min_task_reward()
            && self.min_task_reward() <= self.goal_reward)
        {
            return bad(format!(
                "rewards must satisfy wrong_goal_penalty < 0 <= goal_reward (got {} and {})",
                self.wrong_goal_penalty, self.goal_reward
            ));
        }
        let cells = (self.width * self.height) as usize;
        if cells < self.n_distractors + 2 {
            return bad(format!(
                "{}x{} grid cannot hold the agent and {} objects",
                self.width,
                self.height,
                self.n_distractors + 1
            ));
        }
        Ok(())
    }
}

/// Per-goal task reward, paid on top of the step penalty at a correct pickup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalRewardFn([f64; ObjectSpec::COUNT]);

impl GoalRewardFn {
    pub fn max_task(config: &EnvConfig) -> Self {
        Self([config.goal_reward; ObjectSpec::COUNT])
    }

    pub fn min_task(config: &EnvConfig) -> Self {
        Self([config.min_task_reward(); ObjectSpec::COUNT])
    }

    /// `goal_reward` on `goals`, the min-task reward elsewhere.
    pub fn for_goals(config: &EnvConfig, goals: ObjectSet) -> Self {
        let mut r = [config.min_task_reward(); ObjectSpec::COUNT];
        for g in goals.iter() {
            r[g.index()] = config.goal_reward;
        }
        Self(r)
    }

    pub fn get(&self, goal: GoalId) -> f64 {
        self.0[goal.index()]
    }
}
