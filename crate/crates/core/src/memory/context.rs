use std::fmt::Write;

use super::{performance, Event, Payload, DEFAULT_WINDOW};
use crate::adjudicator::classify_area;
use crate::domain::AreaLayout;

/// Default number of event lines in a context snapshot.
pub const DEFAULT_MAX_EVENTS: usize = 40;
/// Each rendered event line is cut to this many characters.
pub const MAX_LINE_CHARS: usize = 120;

/// Text handed to the language model as scene memory.
pub type ContextText = String;

/// Renders the participant's current area, error statistics and the most
/// recent `max_events` events, oldest first.
pub fn snapshot_context(events: &[Event], layout: &AreaLayout, max_events: usize) -> ContextText {
    assert!(max_events > 0, "max_events must be positive");
    let area_id = events
        .iter()
        .rev()
        .find_map(|e| match &e.payload {
            Payload::PositionUpdate(p) => Some(p.area.clone()),
            _ => None,
        })
        .unwrap_or_else(|| classify_area(layout.participant_start, layout).area_id);
    let description = layout
        .area(&area_id)
        .map(|a| a.description.as_str())
        .unwrap_or("unknown area");
    let stats = performance(events, DEFAULT_WINDOW);

    let mut out = String::new();
    let _ = writeln!(out, "participant area: {area_id}: {description}");
    let _ = writeln!(
        out,
        "trials: {}, recent error rate: {:.2} (last {}), overall error rate: {:.2}",
        stats.trial_count, stats.short_term_error_rate, stats.window, stats.long_term_error_rate
    );
    let tail = &events[events.len().saturating_sub(max_events)..];
    let _ = writeln!(out, "recent events ({}):", tail.len());
    for e in tail {
        let line = e.to_string();
        match line.char_indices().nth(MAX_LINE_CHARS) {
            Some((cut, _)) => out.push_str(&line[..cut]),
            None => out.push_str(&line),
        }
        out.push('\n');
    }
    out
}
