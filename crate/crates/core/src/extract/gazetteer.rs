//! Surface-form index from folded names to knowledge-base entities.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::kb::KnowledgeBase;
use crate::model::{EntityId, EntityKind};

use super::fold::surface_key;
use super::variants::{name_variants, NameKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    Canonical,
    Alias,
    Generated,
}

/// Base weights per variant kind; canonical > alias > generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VariantWeights {
    pub canonical: f64,
    pub alias: f64,
    pub generated: f64,
}

impl Default for VariantWeights {
    fn default() -> Self {
        VariantWeights {
            canonical: 1.0,
            alias: 0.9,
            generated: 0.7,
        }
    }
}

impl VariantWeights {
    pub fn weight(&self, kind: VariantKind) -> f64 {
        match kind {
            VariantKind::Canonical => self.canonical,
            VariantKind::Alias => self.alias,
            VariantKind::Generated => self.generated,
        }
    }

    pub fn is_ordered(&self) -> bool {
        self.canonical > self.alias && self.alias > self.generated && self.generated > 0.0
    }
}

/// One indexed entry for a surface key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazetteerEntry {
    pub entity_id: EntityId,
    pub kind: VariantKind,
    pub weight: f64,
    /// When set, the source text must equal this string exactly (acronyms
    /// would otherwise match ordinary lowercase words).
    pub exact: Option<String>,
}

/// Short all-caps aliases are matched case-sensitively, like initialisms.
fn is_acronym(s: &str) -> bool {
    let letters: Vec<char> = s.chars().filter(|c| c.is_alphanumeric()).collect();
    !letters.is_empty()
        && letters.len() <= 5
        && letters.iter().all(|c| c.is_uppercase() || c.is_ascii_digit())
}

#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    index: HashMap<String, Vec<GazetteerEntry>>,
    kinds: HashMap<EntityId, EntityKind>,
    max_tokens: usize,
}

impl Gazetteer {
    /// Index every company and person name, alias and generated variant.
    pub fn build(kb: &KnowledgeBase, weights: VariantWeights) -> Gazetteer {
        let mut g = Gazetteer::default();
        for c in kb.companies() {
            g.kinds.insert(c.id.clone(), EntityKind::Company);
            g.add_named(&c.id, &c.canonical_name, c.aliases.iter(), NameKind::Company, weights);
        }
        for p in kb.persons() {
            g.kinds.insert(p.id.clone(), EntityKind::Person);
            g.add_named(&p.id, &p.full_name, std::iter::empty(), NameKind::Person, weights);
        }
        for entries in g.index.values_mut() {
            entries.sort_by(|a, b| {
                b.weight
                    .total_cmp(&a.weight)
                    .then_with(|| a.entity_id.cmp(&b.entity_id))
            });
        }
        g
    }

    fn add_named<'a>(
        &mut self,
        id: &EntityId,
        canonical: &str,
        aliases: impl Iterator<Item = &'a String>,
        kind: NameKind,
        weights: VariantWeights,
    ) {
        self.add(id, canonical, VariantKind::Canonical, None, weights);
        for alias in aliases {
            let exact = is_acronym(alias).then(|| alias.clone());
            self.add(id, alias, VariantKind::Alias, exact, weights);
        }
        for v in name_variants(canonical, kind) {
            let exact = v.initialism.then(|| v.text.clone());
            self.add(id, &v.text, VariantKind::Generated, exact, weights);
        }
    }

    fn add(
        &mut self,
        id: &EntityId,
        surface: &str,
        kind: VariantKind,
        exact: Option<String>,
        weights: VariantWeights,
    ) {
        let key = surface_key(surface);
        if key.is_empty() {
            return;
        }
        let weight = weights.weight(kind);
        self.max_tokens = self.max_tokens.max(key.split(' ').count());
        let entries = self.index.entry(key).or_default();
        match entries.iter_mut().find(|e| &e.entity_id == id) {
            Some(existing) => {
                if weight > existing.weight {
                    existing.weight = weight;
                    existing.kind = kind;
                }
                // The least restrictive form wins.
                if exact.is_none() {
                    existing.exact = None;
                }
            }
            None => entries.push(GazetteerEntry {
                entity_id: id.clone(),
                kind,
                weight,
                exact,
            }),
        }
    }

    pub fn lookup(&self, key: &str) -> &[GazetteerEntry] {
        self.index.get(key).map_or(&[], Vec::as_slice)
    }

    pub fn entity_kind(&self, id: &EntityId) -> Option<EntityKind> {
        self.kinds.get(id).copied()
    }

    pub fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Sorted view of the index, for inspection and tests.
    pub fn entries(&self) -> BTreeMap<String, Vec<(EntityId, VariantKind)>> {
        self.index
            .iter()
            .map(|(k, v)| {
                let mut items: Vec<_> = v.iter().map(|e| (e.entity_id.clone(), e.kind)).collect();
                items.sort();
                (k.clone(), items)
            })
            .collect()
    }
}
