//! Items, recipes and the combinatorics of the innovation task.
//!
//! A [`TaskTree`] is a hierarchy of items organised in innovation levels.
//! Level 0 holds the six basic items every player starts with; every other
//! item is the product of exactly one recipe whose ingredients come from
//! strictly lower levels. Attempts are multisets of one to three items.

use std::collections::HashMap;
use std::fmt;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of level-0 items every tree starts from.
pub const BASIC_ITEM_COUNT: usize = 6;

/// Largest multiset an attempt may contain.
pub const MAX_COMBINATION: usize = 3;

/// Level sizes of the bundled default tree.
pub const DEFAULT_LEVEL_SIZES: [usize; 11] = [6, 4, 2, 2, 2, 3, 3, 7, 11, 48, 96];

const DEFAULT_TREE_JSON: &str = include_str!("../data/default_tree.json");

/// Dense 0-based index of an item within its tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u32);

impl ItemId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaskError {
    #[error("task tree parse error: {0}")]
    Parse(String),
    #[error("item record {position} has id {id}; ids must be dense and ordered 0..n-1")]
    NonDenseId { position: usize, id: u32 },
    #[error("`levels` declares {declared} items but {actual} items are listed")]
    LevelCountMismatch { declared: usize, actual: usize },
    #[error("item {id} ({name}) has level {level}, inconsistent with `levels`")]
    LevelMismatch { id: u32, name: String, level: u32 },
    #[error("tree must have exactly {BASIC_ITEM_COUNT} basic items, found {0}")]
    BasicCount(usize),
    #[error("recipe {recipe}: product {product} is not a declared item")]
    DanglingProduct { recipe: usize, product: u32 },
    #[error("recipe {recipe}: ingredient {ingredient} is not a declared item")]
    DanglingIngredient { recipe: usize, ingredient: u32 },
    #[error("recipe {recipe}: needs 1 to {MAX_COMBINATION} ingredients, has {count}")]
    IngredientCount { recipe: usize, count: usize },
    #[error("recipe {recipe}: ingredient multiset duplicates recipe {other}")]
    DuplicateIngredients { recipe: usize, other: usize },
    #[error("recipe {recipe}: product {product} must sit above all its ingredients")]
    LevelOrder { recipe: usize, product: u32 },
    #[error("recipe {recipe}: product {product} is a basic item")]
    BasicProduct { recipe: usize, product: u32 },
    #[error("recipe {recipe}: item {product} already has recipe {other}")]
    MultipleRecipes { recipe: usize, other: usize, product: u32 },
    #[error("item {id} ({name}) is unreachable from the basic items")]
    Unreachable { id: u32, name: String },
    #[error("unknown item id {0}")]
    UnknownItem(u32),
    #[error("invalid level sizes: {0}")]
    InvalidLevelSizes(String),
    #[error("combination must hold 1 to {MAX_COMBINATION} items, got {0}")]
    CombinationSize(usize),
    #[error("action space is undefined for an empty inventory")]
    EmptyInventory,
    #[error("could not wire a unique recipe for item {0} after repeated draws")]
    RecipeSpaceExhausted(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: ItemId,
    pub name: String,
    pub level: u32,
}

/// A multiset of 1–3 item ids kept in ascending order.
///
/// Unused slots are zeroed, so equal multisets compare and hash identically.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Combination {
    items: [ItemId; MAX_COMBINATION],
    len: u8,
}

impl Combination {
    pub fn new(ids: &[ItemId]) -> Result<Self, TaskError> {
        if ids.is_empty() || ids.len() > MAX_COMBINATION {
            return Err(TaskError::CombinationSize(ids.len()));
        }
        let mut items = [ItemId(0); MAX_COMBINATION];
        items[..ids.len()].copy_from_slice(ids);
        items[..ids.len()].sort_unstable();
        Ok(Self { items, len: ids.len() as u8 })
    }

    pub fn from_raw(ids: &[u32]) -> Result<Self, TaskError> {
        let ids: Vec<ItemId> = ids.iter().copied().map(ItemId).collect();
        Self::new(&ids)
    }

    #[inline]
    pub fn items(&self) -> &[ItemId] {
        &self.items[..self.len as usize]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, id: ItemId) -> bool {
        self.items().contains(&id)
    }

    /// Returns a copy with the item at `position` swapped for `with`.
    pub fn replace(&self, position: usize, with: ItemId) -> Self {
        let mut ids = self.items().to_vec();
        ids[position] = with;
        Self::new(&ids).expect("size unchanged")
    }

    pub fn has_repeats(&self) -> bool {
        self.items().windows(2).any(|w| w[0] == w[1])
    }
}

impl fmt::Debug for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.items().iter().map(|i| i.0)).finish()
    }
}

impl Serialize for Combination {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.items().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Combination {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let ids = Vec::<ItemId>::deserialize(d)?;
        Combination::new(&ids).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recipe {
    pub ingredients: Combination,
    pub product: ItemId,
}

/// On-disk layout of a task tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDocument {
    pub levels: Vec<usize>,
    pub items: Vec<Item>,
    pub recipes: Vec<RecipeRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeRecord {
    pub ingredients: Vec<u32>,
    pub product: u32,
}

/// A validated, immutable task tree.
#[derive(Debug, Clone)]
pub struct TaskTree {
    items: Vec<Item>,
    recipes: Vec<Recipe>,
    level_sizes: Vec<usize>,
    basic_items: Vec<ItemId>,
    by_ingredients: HashMap<Combination, ItemId>,
    recipe_of: Vec<Option<usize>>,
    uses: Vec<u32>,
    score_base: f64,
    scores: Vec<i64>,
}

impl TaskTree {
    /// The bundled default tree (184 items over 11 levels).
    pub fn default_tree() -> Self {
        load_task_tree(DEFAULT_TREE_JSON).expect("bundled tree is valid")
    }

    pub fn from_document(doc: TreeDocument) -> Result<Self, TaskError> {
        validate(doc)
    }

    pub fn to_document(&self) -> TreeDocument {
        TreeDocument {
            levels: self.level_sizes.clone(),
            items: self.items.clone(),
            recipes: self
                .recipes
                .iter()
                .map(|r| RecipeRecord {
                    ingredients: r.ingredients.items().iter().map(|i| i.0).collect(),
                    product: r.product.0,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("tree serializes")
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn item(&self, id: ItemId) -> Result<&Item, TaskError> {
        self.items.get(id.index()).ok_or(TaskError::UnknownItem(id.0))
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn recipes(&self) -> &[Recipe] {
        &self.recipes
    }

    pub fn level_sizes(&self) -> &[usize] {
        &self.level_sizes
    }

    pub fn basic_items(&self) -> &[ItemId] {
        &self.basic_items
    }

    pub fn is_basic(&self, id: ItemId) -> bool {
        self.items.get(id.index()).is_some_and(|i| i.level == 0)
    }

    /// Number of items that can be discovered (everything but the basics).
    pub fn discoverable(&self) -> usize {
        self.items.len() - self.basic_items.len()
    }

    pub fn find(&self, name: &str) -> Option<ItemId> {
        self.items.iter().find(|i| i.name == name).map(|i| i.id)
    }

    /// The unique recipe producing `id`, if it is not a basic item.
    pub fn recipe_for(&self, id: ItemId) -> Option<&Recipe> {
        self.recipe_of.get(id.index()).copied().flatten().map(|r| &self.recipes[r])
    }

    /// How many recipes use `id` as an ingredient.
    pub fn recipe_uses(&self, id: ItemId) -> u32 {
        self.uses.get(id.index()).copied().unwrap_or(0)
    }

    pub fn score_base(&self) -> f64 {
        self.score_base
    }

    /// Score awarded on first acquisition of `id`, using this tree's base.
    #[inline]
    pub fn score(&self, id: ItemId) -> i64 {
        self.scores[id.index()]
    }

    /// Returns a copy scoring items with `base^level`.
    pub fn with_score_base(mut self, base: f64) -> Self {
        self.score_base = base;
        self.scores = self.items.iter().map(|i| score_for_level(i.level, base)).collect();
        self
    }

    pub fn check_ids(&self, c: &Combination) -> Result<(), TaskError> {
        for id in c.items() {
            if id.index() >= self.items.len() {
                return Err(TaskError::UnknownItem(id.0));
            }
        }
        Ok(())
    }

    /// Stable fingerprint of the recipe set (independent of item names).
    pub fn recipe_hash(&self) -> u64 {
        let mut keys: Vec<(u32, [u32; 3], u8)> = self
            .recipes
            .iter()
            .map(|r| {
                let mut a = [0u32; 3];
                for (k, id) in r.ingredients.items().iter().enumerate() {
                    a[k] = id.0;
                }
                (r.product.0, a, r.ingredients.len() as u8)
            })
            .collect();
        keys.sort_unstable();
        let mut h = Fnv::new();
        for (p, a, n) in keys {
            h.write_u32(p);
            h.write_u32(n as u32);
            for x in a {
                h.write_u32(x);
            }
        }
        h.finish()
    }
}

fn score_for_level(level: u32, base: f64) -> i64 {
    if level == 0 {
        0
    } else {
        base.powi(level as i32).round() as i64
    }
}

/// Parses and validates a task tree document (JSON).
pub fn load_task_tree(source: &str) -> Result<TaskTree, TaskError> {
    let doc: TreeDocument = serde_json::from_str(source).map_err(|e| TaskError::Parse(e.to_string()))?;
    validate(doc)
}

fn validate(doc: TreeDocument) -> Result<TaskTree, TaskError> {
    let TreeDocument { levels, items, recipes } = doc;
    for (pos, item) in items.iter().enumerate() {
        if item.id.index() != pos {
            return Err(TaskError::NonDenseId { position: pos, id: item.id.0 });
        }
    }
    let declared: usize = levels.iter().sum();
    if declared != items.len() {
        return Err(TaskError::LevelCountMismatch { declared, actual: items.len() });
    }
    let mut counted = vec![0usize; levels.len()];
    for item in &items {
        match counted.get_mut(item.level as usize) {
            Some(c) => *c += 1,
            None => {
                return Err(TaskError::LevelMismatch { id: item.id.0, name: item.name.clone(), level: item.level });
            }
        }
    }
    if let Some((lvl, _)) = counted.iter().zip(&levels).enumerate().find(|(_, (c, l))| c != l) {
        let item = items.iter().find(|i| i.level as usize == lvl).unwrap_or(&items[0]);
        return Err(TaskError::LevelMismatch { id: item.id.0, name: item.name.clone(), level: item.level });
    }
    let basic_items: Vec<ItemId> = items.iter().filter(|i| i.level == 0).map(|i| i.id).collect();
    if basic_items.len() != BASIC_ITEM_COUNT {
        return Err(TaskError::BasicCount(basic_items.len()));
    }

    let n = items.len();
    let mut by_ingredients: HashMap<Combination, ItemId> = HashMap::with_capacity(recipes.len());
    let mut first_recipe: HashMap<Combination, usize> = HashMap::with_capacity(recipes.len());
    let mut recipe_of: Vec<Option<usize>> = vec![None; n];
    let mut uses = vec![0u32; n];
    let mut parsed = Vec::with_capacity(recipes.len());
    for (idx, rec) in recipes.iter().enumerate() {
        if rec.product as usize >= n {
            return Err(TaskError::DanglingProduct { recipe: idx, product: rec.product });
        }
        if rec.ingredients.is_empty() || rec.ingredients.len() > MAX_COMBINATION {
            return Err(TaskError::IngredientCount { recipe: idx, count: rec.ingredients.len() });
        }
        if let Some(&bad) = rec.ingredients.iter().find(|&&i| i as usize >= n) {
            return Err(TaskError::DanglingIngredient { recipe: idx, ingredient: bad });
        }
        let ingredients = Combination::from_raw(&rec.ingredients)?;
        let product = ItemId(rec.product);
        let p_level = items[product.index()].level;
        if p_level == 0 {
            return Err(TaskError::BasicProduct { recipe: idx, product: product.0 });
        }
        let max_in = ingredients.items().iter().map(|i| items[i.index()].level).max().unwrap_or(0);
        if p_level <= max_in {
            return Err(TaskError::LevelOrder { recipe: idx, product: product.0 });
        }
        if let Some(&other) = first_recipe.get(&ingredients) {
            return Err(TaskError::DuplicateIngredients { recipe: idx, other });
        }
        if let Some(other) = recipe_of[product.index()] {
            return Err(TaskError::MultipleRecipes { recipe: idx, other, product: product.0 });
        }
        first_recipe.insert(ingredients, idx);
        by_ingredients.insert(ingredients, product);
        recipe_of[product.index()] = Some(idx);
        let mut distinct = ingredients.items().to_vec();
        distinct.dedup();
        for i in distinct {
            uses[i.index()] += 1;
        }
        parsed.push(Recipe { ingredients, product });
    }

    // bottom-up closure from the basics
    let mut owned = vec![false; n];
    for b in &basic_items {
        owned[b.index()] = true;
    }
    loop {
        let mut changed = false;
        for r in &parsed {
            if !owned[r.product.index()] && r.ingredients.items().iter().all(|i| owned[i.index()]) {
                owned[r.product.index()] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if let Some(item) = items.iter().find(|i| !owned[i.id.index()]) {
        return Err(TaskError::Unreachable { id: item.id.0, name: item.name.clone() });
    }

    let base = 2.0;
    let scores = items.iter().map(|i| score_for_level(i.level, base)).collect();
    Ok(TaskTree {
        items,
        recipes: parsed,
        level_sizes: levels,
        basic_items,
        by_ingredients,
        recipe_of,
        uses,
        score_base: base,
        scores,
    })
}

/// Looks up the product of `c`, if any recipe matches it exactly.
pub fn resolve_attempt(tree: &TaskTree, c: &Combination) -> Result<Option<ItemId>, TaskError> {
    tree.check_ids(c)?;
    Ok(tree.by_ingredients.get(c).copied())
}

/// `round(base^level)` for discovered items, 0 for basics.
pub fn item_score(tree: &TaskTree, id: ItemId, base: f64) -> Result<i64, TaskError> {
    let item = tree.item(id)?;
    Ok(score_for_level(item.level, base))
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of distinct multisets of size 1–3 over `n` items.
pub fn action_space_size(n: usize) -> Result<u64, TaskError> {
    if n == 0 {
        return Err(TaskError::EmptyInventory);
    }
    let n = n as u64;
    Ok(binomial(n, 1) + binomial(n + 1, 2) + binomial(n + 2, 3))
}

/// Set of items an agent or player owns, remembering acquisition order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inventory {
    order: Vec<ItemId>,
    mask: Vec<u64>,
}

impl Inventory {
    pub fn basic(tree: &TaskTree) -> Self {
        let mut inv = Self::empty(tree.len());
        for &b in tree.basic_items() {
            inv.insert(b);
        }
        inv
    }

    pub fn empty(capacity: usize) -> Self {
        Self { order: Vec::new(), mask: vec![0; capacity.div_ceil(64).max(1)] }
    }

    pub fn from_items(capacity: usize, items: &[ItemId]) -> Self {
        let mut inv = Self::empty(capacity);
        for &i in items {
            inv.insert(i);
        }
        inv
    }

    #[inline]
    pub fn contains(&self, id: ItemId) -> bool {
        let i = id.index();
        self.mask.get(i / 64).is_some_and(|w| w & (1 << (i % 64)) != 0)
    }

    /// Adds `id`; returns false if it was already owned.
    pub fn insert(&mut self, id: ItemId) -> bool {
        let i = id.index();
        if i / 64 >= self.mask.len() {
            self.mask.resize(i / 64 + 1, 0);
        }
        let bit = 1u64 << (i % 64);
        if self.mask[i / 64] & bit != 0 {
            return false;
        }
        self.mask[i / 64] |= bit;
        self.order.push(id);
        true
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Items in acquisition order (the display order).
    #[inline]
    pub fn items(&self) -> &[ItemId] {
        &self.order
    }

    pub fn sorted(&self) -> Vec<ItemId> {
        let mut v = self.order.clone();
        v.sort_unstable();
        v
    }

    pub fn owns_all(&self, c: &Combination) -> bool {
        c.items().iter().all(|&i| self.contains(i))
    }

    /// 1-based display slot of `id`.
    pub fn position(&self, id: ItemId) -> Option<usize> {
        self.order.iter().position(|&x| x == id).map(|p| p + 1)
    }

    /// Order-independent fingerprint of the owned set.
    pub fn state_hash(&self) -> String {
        let mut h = Fnv::new();
        let mut words = self.mask.clone();
        while words.len() > 1 && *words.last().unwrap() == 0 {
            words.pop();
        }
        for w in words {
            h.write_u64(w);
        }
        format!("{:016x}", h.finish())
    }
}

/// Every distinct multiset of size 1–3 over `inv`, in canonical order.
pub fn enumerate_actions(inv: &Inventory) -> Vec<Combination> {
    enumerate_over(&inv.sorted())
}

/// One action drawn uniformly from the whole action space of `inv`: the
/// size is weighted by the number of multisets of that size, then a
/// multiset is drawn by stars and bars.
pub fn sample_action<R: Rng + ?Sized>(inv: &Inventory, rng: &mut R) -> Combination {
    let pool = inv.items();
    let n = pool.len() as u64;
    assert!(n > 0, "empty inventory has no actions");
    let w = [n, n * (n + 1) / 2, n * (n + 1) * (n + 2) / 6];
    let mut u = rng.random_range(0..w.iter().sum::<u64>());
    let mut k = 1;
    for (size, &wk) in w.iter().enumerate() {
        if u < wk {
            k = size + 1;
            break;
        }
        u -= wk;
    }
    let mut slots = rand::seq::index::sample(rng, pool.len() + k - 1, k).into_vec();
    slots.sort_unstable();
    let ids: Vec<ItemId> = slots.iter().enumerate().map(|(i, &s)| pool[s - i]).collect();
    Combination::new(&ids).expect("1..=3 items")
}

pub(crate) fn enumerate_over(ids: &[ItemId]) -> Vec<Combination> {
    let n = ids.len();
    let mut out = Vec::with_capacity(n + n * (n + 1) / 2 + n * (n + 1) * (n + 2) / 6);
    for a in 0..n {
        out.push(Combination::new(&[ids[a]]).unwrap());
        for b in a..n {
            out.push(Combination::new(&[ids[a], ids[b]]).unwrap());
            for c in b..n {
                out.push(Combination::new(&[ids[a], ids[b], ids[c]]).unwrap());
            }
        }
    }
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantMode {
    /// Keep items and level sizes, rewire every recipe.
    ShuffleRules,
    /// Build a fresh tree with the given level sizes.
    Resize,
}

/// Builds a randomised task variant; deterministic in `seed`.
///
/// Each generated recipe has one ingredient from the level directly below
/// its product and the rest from any lower level, with no repeated items.
pub fn generate_task_variant(
    tree: &TaskTree,
    mode: VariantMode,
    level_sizes: Option<&[usize]>,
    seed: u64,
) -> Result<TaskTree, TaskError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items: Vec<Item> = match mode {
        VariantMode::ShuffleRules => tree.items.clone(),
        VariantMode::Resize => {
            let sizes = level_sizes.ok_or_else(|| TaskError::InvalidLevelSizes("resize needs level sizes".into()))?;
            if sizes.first() != Some(&BASIC_ITEM_COUNT) {
                return Err(TaskError::InvalidLevelSizes(format!("first level must hold {BASIC_ITEM_COUNT} items")));
            }
            if let Some(pos) = sizes.iter().position(|&s| s == 0) {
                return Err(TaskError::InvalidLevelSizes(format!("level {pos} is empty")));
            }
            let mut items = Vec::with_capacity(sizes.iter().sum());
            for &b in tree.basic_items() {
                items.push(Item { id: ItemId(items.len() as u32), name: tree.items[b.index()].name.clone(), level: 0 });
            }
            for (level, &size) in sizes.iter().enumerate().skip(1) {
                for k in 0..size {
                    items.push(Item { id: ItemId(items.len() as u32), name: format!("l{level}_item{k}"), level: level as u32 });
                }
            }
            items
        }
    };
    let mut levels: Vec<usize> = Vec::new();
    let mut by_level: Vec<Vec<ItemId>> = Vec::new();
    for item in &items {
        let l = item.level as usize;
        if by_level.len() <= l {
            by_level.resize(l + 1, Vec::new());
            levels.resize(l + 1, 0);
        }
        by_level[l].push(item.id);
        levels[l] += 1;
    }

    let mut used: HashMap<Combination, ()> = HashMap::new();
    let mut recipes = Vec::new();
    let mut below: Vec<ItemId> = Vec::new();
    for level in 1..by_level.len() {
        below.extend_from_slice(&by_level[level - 1]);
        let prev = &by_level[level - 1];
        for &product in &by_level[level] {
            let mut wired = None;
            for _ in 0..1000 {
                let size = rng.random_range(1..=MAX_COMBINATION).min(below.len());
                let anchor = *prev.choose(&mut rng).expect("non-empty level");
                let mut ids = vec![anchor];
                while ids.len() < size {
                    let pick = *below.choose(&mut rng).expect("non-empty");
                    if !ids.contains(&pick) {
                        ids.push(pick);
                    }
                }
                let c = Combination::new(&ids)?;
                if let std::collections::hash_map::Entry::Vacant(e) = used.entry(c) {
                    e.insert(());
                    wired = Some(c);
                    break;
                }
            }
            let ingredients = wired.ok_or(TaskError::RecipeSpaceExhausted(product.0))?;
            recipes.push(RecipeRecord { ingredients: ingredients.items().iter().map(|i| i.0).collect(), product: product.0 });
        }
    }
    let out = validate(TreeDocument { levels, items, recipes })?;
    Ok(out.with_score_base(tree.score_base))
}

/// 64-bit FNV-1a, used for stable fingerprints.
pub(crate) struct Fnv(u64);

impl Fnv {
    pub(crate) fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
    pub(crate) fn write_u8(&mut self, b: u8) {
        self.0 ^= b as u64;
        self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
    }
    pub(crate) fn write_u32(&mut self, x: u32) {
        for b in x.to_le_bytes() {
            self.write_u8(b);
        }
    }
    pub(crate) fn write_u64(&mut self, x: u64) {
        for b in x.to_le_bytes() {
            self.write_u8(b);
        }
    }
    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}
