//! Role-restricted slot filling.
//!
//! Only five roles are ever extracted, each by a dedicated rule keyed on the
//! document type: trial records yield `performedBy` and `clinicalPhaseOf`,
//! team pages yield `chiefExecutiveOfficerOf` and `hasKeyPerson`, contact
//! pages yield `isPhoneNumberOf`. Nothing else is attempted, and a NIL
//! mention never produces an assignment.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::crawl::PageClass;
use crate::kb::KnowledgeBase;
use crate::model::{EntityId, EntityKind, Phase};

use super::fold::char_slice;
use super::link::LinkedMention;
use super::phone::{find_phone_numbers, PhoneRules};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "clinicalPhaseOf")]
    ClinicalPhaseOf,
    #[serde(rename = "performedBy")]
    PerformedBy,
    #[serde(rename = "isPhoneNumberOf")]
    IsPhoneNumberOf,
    #[serde(rename = "chiefExecutiveOfficerOf")]
    ChiefExecutiveOfficerOf,
    #[serde(rename = "hasKeyPerson")]
    HasKeyPerson,
}

impl Role {
    pub const ALL: [Role; 5] = [
        Role::ClinicalPhaseOf,
        Role::PerformedBy,
        Role::IsPhoneNumberOf,
        Role::ChiefExecutiveOfficerOf,
        Role::HasKeyPerson,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Role::ClinicalPhaseOf => "clinicalPhaseOf",
            Role::PerformedBy => "performedBy",
            Role::IsPhoneNumberOf => "isPhoneNumberOf",
            Role::ChiefExecutiveOfficerOf => "chiefExecutiveOfficerOf",
            Role::HasKeyPerson => "hasKeyPerson",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Subject or object of an assignment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum SlotValue {
    Entity(EntityId),
    /// A person not yet in the KB, known only by name.
    Provisional(String),
    Phase(Phase),
    Phone(String),
}

impl fmt::Display for SlotValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotValue::Entity(id) => write!(f, "{id}"),
            SlotValue::Provisional(name) => write!(f, "provisional:{name}"),
            SlotValue::Phase(p) => write!(f, "{p}"),
            SlotValue::Phone(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub url: String,
    pub span: (usize, usize),
    pub excerpt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotAssignment {
    pub subject: SlotValue,
    pub role: Role,
    pub object: SlotValue,
    pub confidence: f64,
    pub evidence: Evidence,
    /// Title text that triggered a personnel assignment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

impl SlotAssignment {
    /// `(subject, role, object)` rendered for set comparisons.
    pub fn triple(&self) -> (String, String, String) {
        (
            self.subject.to_string(),
            self.role.to_string(),
            self.object.to_string(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlotConfig {
    pub proximity_chars: usize,
    pub sponsor_confidence: f64,
    pub phase_confidence: f64,
    pub team_confidence: f64,
    pub contact_confidence: f64,
}

impl Default for SlotConfig {
    fn default() -> Self {
        SlotConfig {
            proximity_chars: 120,
            sponsor_confidence: 0.95,
            phase_confidence: 1.0,
            team_confidence: 0.8,
            contact_confidence: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentKind {
    /// Text is the trial's sponsor list, lead sponsor on the first line.
    TrialRecord { phase: Phase },
    Page(PageClass),
}

#[derive(Debug, Clone, Copy)]
pub struct Document<'a> {
    pub url: &'a str,
    pub text: &'a str,
    pub kind: DocumentKind,
    /// Trial id for records; owning company for pages.
    pub subject: &'a EntityId,
}

pub struct SlotContext<'a> {
    pub kb: &'a KnowledgeBase,
    pub phone_rules: &'a PhoneRules,
    pub config: &'a SlotConfig,
}

#[derive(Debug, Clone)]
struct TitleMatch {
    start: usize,
    end: usize,
    label: String,
    ceo: bool,
}

fn title_patterns() -> &'static [(Regex, bool)] {
    static PATS: OnceLock<Vec<(Regex, bool)>> = OnceLock::new();
    PATS.get_or_init(|| {
        [
            (r"\bCEO\b", true),
            (r"(?i)\bchief executive officer\b", true),
            (r"\b(?:CFO|COO|CTO|CMO|CSO|CBO|CIO|CCO|CDO)\b", false),
            (r"(?i)\bchief (?:[a-z]+ ){1,2}officer\b", false),
            (r"(?i)\b(?:vice[- ])?chair(?:man|woman|person)?(?: of the board)?\b", false),
            (
                r"(?i)\b(?:non-executive |independent )?(?:board member|member of the board|board director)\b",
                false,
            ),
        ]
        .into_iter()
        .map(|(p, ceo)| (Regex::new(p).expect("static regex"), ceo))
        .collect()
    })
}

/// Words that make a capitalized pair a title or heading, not a name.
const NON_NAME_WORDS: &[&str] = &[
    "Chief", "Officer", "Executive", "Board", "Member", "Members", "Director", "Directors", "Chair",
    "Chairman", "Chairwoman", "Chairperson", "Our", "The", "Team", "Management", "Leadership",
    "Meet", "Contact", "About", "Vice", "Head", "Senior", "Scientific", "Advisory", "Financial",
    "Medical", "Operating", "Technology", "Business", "Non", "Independent", "President", "Founder",
    "Co", "Us", "Dr", "Prof", "Mr", "Mrs", "Ms",
];

fn byte_to_char(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

fn find_titles(text: &str) -> Vec<TitleMatch> {
    let mut out: Vec<TitleMatch> = Vec::new();
    for (re, ceo) in title_patterns() {
        for m in re.find_iter(text) {
            let start = byte_to_char(text, m.start());
            let end = start + m.as_str().chars().count();
            if out.iter().any(|t| start < t.end && t.start < end) {
                continue;
            }
            out.push(TitleMatch {
                start,
                end,
                label: if *ceo { "CEO".to_string() } else { m.as_str().to_string() },
                ceo: *ceo,
            });
        }
    }
    out.sort_by_key(|t| t.start);
    out
}

fn name_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"\b(\p{Lu}[\p{Ll}'’]+(?:-\p{Lu}[\p{Ll}'’]+)?) (\p{Lu}[\p{Ll}'’]+(?:-\p{Lu}[\p{Ll}'’]+)?)\b")
            .expect("static regex")
    })
}

/// Capitalized bigrams in `text[from..to]` (char offsets), as (start, end, name).
fn bigrams(text: &str, from: usize, to: usize, blocked: &[(usize, usize)]) -> Vec<(usize, usize, String)> {
    let segment = char_slice(text, from, to);
    let mut out = Vec::new();
    for caps in name_re().captures_iter(&segment) {
        let whole = caps.get(0).expect("group 0");
        let first = caps.get(1).expect("group 1").as_str();
        let second = caps.get(2).expect("group 2").as_str();
        if NON_NAME_WORDS.contains(&first) || NON_NAME_WORDS.contains(&second) {
            continue;
        }
        let start = from + byte_to_char(&segment, whole.start());
        let end = start + whole.as_str().chars().count();
        if blocked.iter().any(|&(s, e)| start < e && s < end) {
            continue;
        }
        out.push((start, end, whole.as_str().to_string()));
    }
    out
}

fn line_bounds(text: &str, pos: usize) -> (usize, usize) {
    let chars: Vec<char> = text.chars().collect();
    let mut start = pos.min(chars.len());
    while start > 0 && chars[start - 1] != '\n' {
        start -= 1;
    }
    let mut end = pos.min(chars.len());
    while end < chars.len() && chars[end] != '\n' {
        end += 1;
    }
    (start, end)
}

fn excerpt(text: &str, span: (usize, usize)) -> String {
    let (s, _) = line_bounds(text, span.0);
    let (_, e) = line_bounds(text, span.1.saturating_sub(1).max(span.0));
    char_slice(text, s, e).replace('\n', " / ")
}

fn gap(a: (usize, usize), b: (usize, usize)) -> usize {
    if a.1 <= b.0 {
        b.0 - a.1
    } else { a.0.saturating_sub(b.1) }
}

fn same_line(text: &str, a: (usize, usize), b: (usize, usize)) -> bool {
    let (lo, hi) = (a.0.min(b.0), a.1.max(b.1));
    !char_slice(text, lo, hi).contains('\n')
}

/// Apply the rule for the document's type.
pub fn fill_slots(doc: &Document<'_>, mentions: &[LinkedMention], ctx: &SlotContext<'_>) -> Vec<SlotAssignment> {
    match doc.kind {
        DocumentKind::TrialRecord { phase } => trial_slots(doc, phase, mentions, ctx),
        DocumentKind::Page(PageClass::Team) => team_slots(doc, mentions, ctx),
        DocumentKind::Page(PageClass::Contact) => contact_slots(doc, ctx),
        DocumentKind::Page(_) => Vec::new(),
    }
}

fn trial_slots(
    doc: &Document<'_>,
    phase: Phase,
    mentions: &[LinkedMention],
    ctx: &SlotContext<'_>,
) -> Vec<SlotAssignment> {
    let mut out = Vec::new();
    let lead_end = doc.text.chars().position(|c| c == '\n').unwrap_or(doc.text.chars().count());
    let sponsor = mentions
        .iter()
        .filter(|m| m.span.1 <= lead_end)
        .filter_map(|m| m.resolved.as_ref().map(|id| (m, id)))
        .filter(|(_, id)| id.kind() == Some(EntityKind::Company))
        .max_by_key(|(m, _)| (m.span.1 - m.span.0, std::cmp::Reverse(m.span.0)));
    if let Some((m, id)) = sponsor {
        out.push(SlotAssignment {
            subject: SlotValue::Entity(doc.subject.clone()),
            role: Role::PerformedBy,
            object: SlotValue::Entity(id.clone()),
            confidence: ctx.config.sponsor_confidence,
            evidence: Evidence {
                url: doc.url.to_string(),
                span: m.span,
                excerpt: m.surface.clone(),
            },
            title: None,
        });
    }
    if phase != Phase::Unknown {
        out.push(SlotAssignment {
            subject: SlotValue::Entity(doc.subject.clone()),
            role: Role::ClinicalPhaseOf,
            object: SlotValue::Phase(phase),
            confidence: ctx.config.phase_confidence,
            evidence: Evidence {
                url: doc.url.to_string(),
                span: (0, 0),
                excerpt: phase.to_string(),
            },
            title: None,
        });
    }
    out
}

enum PersonRef {
    Known(EntityId),
    Provisional(String),
}

fn team_slots(doc: &Document<'_>, mentions: &[LinkedMention], ctx: &SlotContext<'_>) -> Vec<SlotAssignment> {
    let text = doc.text;
    let proximity = ctx.config.proximity_chars;
    let titles = find_titles(text);
    let persons: Vec<(&LinkedMention, &EntityId)> = mentions
        .iter()
        .filter_map(|m| m.resolved.as_ref().map(|id| (m, id)))
        .filter(|(_, id)| id.kind() == Some(EntityKind::Person))
        .collect();

    // Greedy one-to-one pairing: same line first, then nearest, then titles
    // that follow the name (the usual "Name, Title" layout).
    let mut pairs = Vec::new();
    for (pi, (m, _)) in persons.iter().enumerate() {
        for (ti, t) in titles.iter().enumerate() {
            let d = gap(m.span, (t.start, t.end));
            if d <= proximity {
                let line = same_line(text, m.span, (t.start, t.end));
                let after = t.start >= m.span.1;
                pairs.push((!line, d, !after, m.span.0, pi, ti));
            }
        }
    }
    pairs.sort();
    let mut person_used = vec![false; persons.len()];
    let mut title_used = vec![false; titles.len()];
    let mut found: Vec<(PersonRef, usize, (usize, usize))> = Vec::new();
    for (_, _, _, _, pi, ti) in pairs {
        if person_used[pi] || title_used[ti] {
            continue;
        }
        person_used[pi] = true;
        title_used[ti] = true;
        let m = persons[pi].0;
        let t = &titles[ti];
        let span = (m.span.0.min(t.start), m.span.1.max(t.end));
        found.push((PersonRef::Known(persons[pi].1.clone()), ti, span));
    }

    // Unpaired titles: a capitalized name adjacent to the title becomes a
    // provisional person.
    let blocked: Vec<(usize, usize)> = mentions.iter().map(|m| m.span).collect();
    let mut provisional_names = BTreeSet::new();
    for (ti, t) in titles.iter().enumerate() {
        if title_used[ti] {
            continue;
        }
        let (ls, le) = line_bounds(text, t.start);
        let before = bigrams(text, ls, t.start, &blocked);
        let after = bigrams(text, t.end, le, &blocked);
        let previous_line = if ls > 0 {
            let (ps, pe) = line_bounds(text, ls - 1);
            let names = bigrams(text, ps, pe, &blocked);
            // Only a line that is nothing but the name counts.
            names
                .into_iter()
                .filter(|(s, e, _)| {
                    let rest = char_slice(text, ps, *s) + &char_slice(text, *e, pe);
                    rest.chars().all(|c| !c.is_alphanumeric() || "DrProf".contains(c))
                })
                .collect()
        } else {
            Vec::new()
        };
        let pick = before
            .last()
            .cloned()
            .or_else(|| after.first().cloned())
            .or_else(|| previous_line.first().cloned());
        if let Some((s, e, name)) = pick {
            if gap((s, e), (t.start, t.end)) > proximity || !provisional_names.insert(name.clone()) {
                continue;
            }
            let span = (s.min(t.start), e.max(t.end));
            found.push((PersonRef::Provisional(name), ti, span));
        }
    }

    found.sort_by_key(|(_, _, span)| *span);
    found
        .into_iter()
        .map(|(person, ti, span)| {
            let t = &titles[ti];
            let person = match person {
                PersonRef::Known(id) => SlotValue::Entity(id),
                PersonRef::Provisional(name) => SlotValue::Provisional(name),
            };
            let company = SlotValue::Entity(doc.subject.clone());
            let (subject, role, object) = if t.ceo {
                (person, Role::ChiefExecutiveOfficerOf, company)
            } else {
                (company, Role::HasKeyPerson, person)
            };
            SlotAssignment {
                subject,
                role,
                object,
                confidence: ctx.config.team_confidence,
                evidence: Evidence {
                    url: doc.url.to_string(),
                    span,
                    excerpt: excerpt(text, span),
                },
                title: Some(t.label.clone()),
            }
        })
        .collect()
}

fn contact_slots(doc: &Document<'_>, ctx: &SlotContext<'_>) -> Vec<SlotAssignment> {
    let hint = ctx.kb.company(doc.subject).map(|c| c.country.as_str());
    let mut seen = BTreeSet::new();
    find_phone_numbers(doc.text, ctx.phone_rules, hint)
        .into_iter()
        .filter(|m| seen.insert(m.e164.clone()))
        .map(|m| SlotAssignment {
            subject: SlotValue::Entity(doc.subject.clone()),
            role: Role::IsPhoneNumberOf,
            object: SlotValue::Phone(m.e164),
            confidence: ctx.config.contact_confidence,
            evidence: Evidence {
                url: doc.url.to_string(),
                span: (m.start, m.end),
                excerpt: excerpt(doc.text, (m.start, m.end)),
            },
            title: None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::gazetteer::{Gazetteer, VariantWeights};
    use crate::extract::link::{link_document, LinkerConfig};
    use crate::model::{CompanyEntity, Entity, PersonEntity};
    use crate::time::Timestamp;

    fn kb() -> KnowledgeBase {
        let mut kb = KnowledgeBase::new();
        let t = Timestamp::from_unix(0);
        kb.upsert(Entity::Company(CompanyEntity::new("Novagenix AG", "CH")), "t", t)
            .unwrap();
        for name in ["Jane Roe", "John Smith"] {
            kb.upsert(
                Entity::Person(PersonEntity {
                    id: EntityId::default(),
                    full_name: name.into(),
                    affiliations: vec![],
                }),
                "t",
                t,
            )
            .unwrap();
        }
        kb
    }

    fn run(kb: &KnowledgeBase, text: &str, kind: DocumentKind, subject: &EntityId) -> Vec<SlotAssignment> {
        let g = Gazetteer::build(kb, VariantWeights::default());
        let mentions = link_document(text, &g, kb, &LinkerConfig::default());
        let cfg = SlotConfig::default();
        let ctx = SlotContext {
            kb,
            phone_rules: PhoneRules::bundled(),
            config: &cfg,
        };
        fill_slots(
            &Document {
                url: "https://www.novagenix.ch/team",
                text,
                kind,
                subject,
            },
            &mentions,
            &ctx,
        )
    }

    #[test]
    fn trial_sponsor_and_phase() {
        let kb = kb();
        let trial = EntityId::trial("fixture", "NCT00000001");
        let out = run(
            &kb,
            "Novagenix AG",
            DocumentKind::TrialRecord { phase: Phase::Phase2 },
            &trial,
        );
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].role, Role::PerformedBy);
        assert_eq!(out[0].object, SlotValue::Entity("co-00001".into()));
        assert_eq!(out[0].confidence, 0.95);
        assert_eq!(out[1].object, SlotValue::Phase(Phase::Phase2));
    }

    #[test]
    fn unlinked_sponsor_yields_no_performed_by() {
        let kb = kb();
        let trial = EntityId::trial("fixture", "NCT00000002");
        let out = run(
            &kb,
            "University Hospital Basel",
            DocumentKind::TrialRecord { phase: Phase::Unknown },
            &trial,
        );
        assert!(out.is_empty());
    }

    #[test]
    fn ceo_on_same_line() {
        let kb = kb();
        let company = EntityId::from("co-00001");
        let out = run(
            &kb,
            "Our Team\nDr. Jane Roe — Chief Executive Officer\nJohn Smith — Chief Financial Officer",
            DocumentKind::Page(PageClass::Team),
            &company,
        );
        let triples: Vec<_> = out.iter().map(|a| a.triple()).collect();
        assert_eq!(
            triples,
            vec![
                ("pe-00001".into(), "chiefExecutiveOfficerOf".into(), "co-00001".into()),
                ("co-00001".into(), "hasKeyPerson".into(), "pe-00002".into()),
            ]
        );
        assert_eq!(out[0].confidence, 0.8);
    }

    #[test]
    fn stacked_layout_pairs_titles_below_names() {
        let kb = kb();
        let company = EntityId::from("co-00001");
        let out = run(
            &kb,
            "Jane Roe\nCEO\nJohn Smith\nCFO",
            DocumentKind::Page(PageClass::Team),
            &company,
        );
        let triples: Vec<_> = out.iter().map(|a| a.triple()).collect();
        assert_eq!(triples[0].0, "pe-00001");
        assert_eq!(triples[0].1, "chiefExecutiveOfficerOf");
        assert_eq!(triples[1].2, "pe-00002");
    }

    #[test]
    fn unknown_executive_becomes_provisional() {
        let kb = kb();
        let company = EntityId::from("co-00001");
        let out = run(
            &kb,
            "Leadership\nMax Muster, Chief Executive Officer and Chairman",
            DocumentKind::Page(PageClass::Team),
            &company,
        );
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].subject, SlotValue::Provisional("Max Muster".into()));
        assert_eq!(out[0].role, Role::ChiefExecutiveOfficerOf);
    }

    #[test]
    fn contact_page_phone() {
        let kb = kb();
        let company = EntityId::from("co-00001");
        let out = run(
            &kb,
            "Contact\nPhone +41 81 286 24 24\nFax +41 81 286 24 99",
            DocumentKind::Page(PageClass::Contact),
            &company,
        );
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].triple().2, "+41812862424");
        assert_eq!(out[0].role, Role::IsPhoneNumberOf);
        assert_eq!(out[0].confidence, 0.9);
    }

    #[test]
    fn other_pages_extract_nothing() {
        let kb = kb();
        let company = EntityId::from("co-00001");
        assert!(run(
            &kb,
            "Jane Roe, CEO. Call +41 81 286 24 24",
            DocumentKind::Page(PageClass::Other),
            &company
        )
        .is_empty());
    }
}
