//! Line-based change detection between two snapshots of one URL.

use serde::{Deserialize, Serialize};
use similar::{DiffTag, TextDiff};

use crate::model::EntityId;
use crate::time::Timestamp;

use super::snapshot::PageSnapshot;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangedRegion {
    pub company_id: EntityId,
    pub url: String,
    pub old_excerpt: String,
    pub new_excerpt: String,
    pub detected_at: Timestamp,
}

/// Context lines kept around each changed run.
pub const CONTEXT_LINES: usize = 1;

/// Diff the normalized texts; adjacent changed lines form one region with
/// one line of context on either side.
pub fn detect_changes(previous: &PageSnapshot, current: &PageSnapshot, detected_at: Timestamp) -> Vec<ChangedRegion> {
    if previous.content_hash == current.content_hash {
        return Vec::new();
    }
    let old = previous.text();
    let new = current.text();
    let old_lines: Vec<&str> = old.lines().collect();
    let new_lines: Vec<&str> = new.lines().collect();
    let diff = TextDiff::from_slices(&old_lines, &new_lines);
    diff.grouped_ops(CONTEXT_LINES)
        .into_iter()
        .filter(|group| group.iter().any(|op| op.tag() != DiffTag::Equal))
        .filter_map(|group| {
            let first = group.first()?;
            let last = group.last()?;
            let old_range = first.old_range().start..last.old_range().end;
            let new_range = first.new_range().start..last.new_range().end;
            let old_excerpt = old_lines[old_range].join("\n");
            let new_excerpt = new_lines[new_range].join("\n");
            (old_excerpt != new_excerpt).then(|| ChangedRegion {
                company_id: current.company_id.clone(),
                url: current.url.clone(),
                old_excerpt,
                new_excerpt,
                detected_at,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(body: &str) -> PageSnapshot {
        PageSnapshot::new(
            "https://e.test/contact",
            &EntityId::from("co-00001"),
            Timestamp::from_unix(0),
            200,
            body.as_bytes().to_vec(),
        )
    }

    #[test]
    fn identical_and_markup_only_changes_are_silent() {
        let a = snap("<p>Contact</p><p>Phone +41 81 286 24 24</p>");
        assert!(detect_changes(&a, &a, Timestamp::from_unix(1)).is_empty());
        let b = snap("<div>Contact</div>\n\n<div>Phone   +41 81 286 24 24</div>");
        assert!(detect_changes(&a, &b, Timestamp::from_unix(1)).is_empty());
    }

    #[test]
    fn replaced_phone_is_one_region() {
        let a = snap("<h1>Contact</h1><p>Novagenix AG</p><p>Phone +41 81 286 24 24</p><p>Basel</p><p>Open 9-17</p>");
        let b = snap("<h1>Contact</h1><p>Novagenix AG</p><p>Phone +41 61 555 01 01</p><p>Basel</p><p>Open 9-17</p>");
        let regions = detect_changes(&a, &b, Timestamp::from_unix(1));
        assert_eq!(regions.len(), 1);
        let r = &regions[0];
        assert!(r.old_excerpt.contains("+41 81 286 24 24"));
        assert!(r.new_excerpt.contains("+41 61 555 01 01"));
        assert_eq!(r.old_excerpt, "Novagenix AG\nPhone +41 81 286 24 24\nBasel");
    }

    #[test]
    fn distant_changes_are_separate_regions() {
        let a = snap("<p>a</p><p>b</p><p>c</p><p>d</p><p>e</p><p>f</p><p>g</p>");
        let b = snap("<p>A</p><p>b</p><p>c</p><p>d</p><p>e</p><p>f</p><p>G</p>");
        assert_eq!(detect_changes(&a, &b, Timestamp::from_unix(1)).len(), 2);
    }
}
