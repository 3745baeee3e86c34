use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AnswerKind, AnswerPayload};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum HintChannel {
    Text,
    Image,
    Video,
    Audio,
}

impl fmt::Display for HintChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HintChannel::Text => "text",
            HintChannel::Image => "image",
            HintChannel::Video => "video",
            HintChannel::Audio => "audio",
        })
    }
}

/// Content-addressed file stored next to the template (e.g. an example image
/// or a sound clip that is not part of the collection).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResourceRef {
    /// `<sha256-hex>.<ext>`
    pub resource: String,
    pub mime_type: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HintContent {
    Fragment(AnswerPayload),
    Resource(ResourceRef),
}

impl HintContent {
    pub fn fits(&self, channel: HintChannel) -> bool {
        match (channel, self) {
            (HintChannel::Text, HintContent::Fragment(p)) => p.kind == AnswerKind::Text,
            (HintChannel::Text, HintContent::Resource(_)) => false,
            (_, HintContent::Fragment(p)) => p.kind != AnswerKind::Text,
            (_, HintContent::Resource(_)) => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HintChannelEntry {
    pub channel: HintChannel,
    pub active_from_ms: i64,
    /// Exclusive end; `None` keeps the entry up until the task ends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_until_ms: Option<i64>,
    pub payload: HintContent,
}

impl HintChannelEntry {
    pub fn is_active_at(&self, t: i64) -> bool {
        self.active_from_ms <= t && self.active_until_ms.is_none_or(|until| t < until)
    }

    fn end(&self) -> i64 {
        self.active_until_ms.unwrap_or(i64::MAX)
    }

    pub fn intersects(&self, other: &HintChannelEntry) -> bool {
        self.active_from_ms.max(other.active_from_ms) < self.end().min(other.end())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HintTimeline {
    pub entries: Vec<HintChannelEntry>,
}

impl HintTimeline {
    /// Channels holding two entries whose intervals intersect.
    pub fn overlapping_channels(&self) -> Vec<HintChannel> {
        let mut out = Vec::new();
        for (i, a) in self.entries.iter().enumerate() {
            for b in &self.entries[i + 1..] {
                if a.channel == b.channel && a.intersects(b) && !out.contains(&a.channel) {
                    out.push(a.channel);
                }
            }
        }
        out.sort();
        out
    }
}

/// The description presented at `t` ms after task start: every entry whose
/// half-open interval `[active_from_ms, active_until_ms)` contains `t`.
pub fn desc_at(timeline: &HintTimeline, t: i64) -> Vec<&HintChannelEntry> {
    timeline
        .entries
        .iter()
        .filter(|e| e.is_active_at(t))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text(from: i64, until: Option<i64>, s: &str) -> HintChannelEntry {
        HintChannelEntry {
            channel: HintChannel::Text,
            active_from_ms: from,
            active_until_ms: until,
            payload: HintContent::Fragment(AnswerPayload::text(s)),
        }
    }

    fn resource(
        channel: HintChannel,
        from: i64,
        until: Option<i64>,
        name: &str,
    ) -> HintChannelEntry {
        HintChannelEntry {
            channel,
            active_from_ms: from,
            active_until_ms: until,
            payload: HintContent::Resource(ResourceRef {
                resource: name.into(),
                mime_type: "application/octet-stream".into(),
            }),
        }
    }

    /// Door task: text from 0 s, image from 30 s, expanded text and looping
    /// audio from 90 s, the target video from 180 s to the end.
    fn door_timeline() -> HintTimeline {
        HintTimeline {
            entries: vec![
                text(0, Some(90_000), "A wooden door being shut"),
                resource(HintChannel::Image, 30_000, Some(90_000), "door.jpg"),
                text(
                    90_000,
                    Some(180_000),
                    "A wooden door being shut by a person",
                ),
                resource(HintChannel::Audio, 90_000, Some(180_000), "bang.ogg"),
                HintChannelEntry {
                    channel: HintChannel::Video,
                    active_from_ms: 180_000,
                    active_until_ms: None,
                    payload: HintContent::Fragment(AnswerPayload::segment(
                        "v-09679", 14_500, 17_000,
                    )),
                },
            ],
        }
    }

    fn channels(tl: &HintTimeline, t: i64) -> Vec<HintChannel> {
        let mut c: Vec<_> = desc_at(tl, t).iter().map(|e| e.channel).collect();
        c.sort();
        c
    }

    #[test]
    fn door_task_reveals() {
        let tl = door_timeline();
        assert!(desc_at(&tl, -1).is_empty());
        assert_eq!(channels(&tl, 10_000), vec![HintChannel::Text]);
        let at60 = desc_at(&tl, 60_000);
        assert_eq!(
            channels(&tl, 60_000),
            vec![HintChannel::Text, HintChannel::Image]
        );
        assert!(at60
            .iter()
            .any(|e| e.payload
                == HintContent::Fragment(AnswerPayload::text("A wooden door being shut"))));
        assert_eq!(
            channels(&tl, 100_000),
            vec![HintChannel::Text, HintChannel::Audio]
        );
        assert_eq!(channels(&tl, 210_000), vec![HintChannel::Video]);
        // unbounded entry keeps going past the nominal end
        assert_eq!(channels(&tl, 10_000_000), vec![HintChannel::Video]);
    }

    #[test]
    fn boundaries_are_half_open() {
        let tl = door_timeline();
        assert_eq!(channels(&tl, 29_999), vec![HintChannel::Text]);
        assert_eq!(
            channels(&tl, 30_000),
            vec![HintChannel::Text, HintChannel::Image]
        );
        assert_eq!(
            channels(&tl, 179_999),
            vec![HintChannel::Text, HintChannel::Audio]
        );
        assert_eq!(channels(&tl, 180_000), vec![HintChannel::Video]);
    }

    #[test]
    fn overlap_detection() {
        let tl = HintTimeline {
            entries: vec![text(0, Some(30_000), "a"), text(10_000, Some(40_000), "b")],
        };
        assert_eq!(tl.overlapping_channels(), vec![HintChannel::Text]);
        assert!(door_timeline().overlapping_channels().is_empty());
        let open = HintTimeline {
            entries: vec![text(0, None, "a"), text(50_000, Some(60_000), "b")],
        };
        assert_eq!(open.overlapping_channels(), vec![HintChannel::Text]);
    }

    #[test]
    fn channel_payload_compat() {
        assert!(HintContent::Fragment(AnswerPayload::text("x")).fits(HintChannel::Text));
        assert!(!HintContent::Fragment(AnswerPayload::text("x")).fits(HintChannel::Image));
        assert!(HintContent::Fragment(AnswerPayload::whole_item("i")).fits(HintChannel::Image));
        assert!(!resource(HintChannel::Audio, 0, None, "a")
            .payload
            .fits(HintChannel::Text));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_channel() -> impl Strategy<Value = HintChannel> {
            prop_oneof![
                Just(HintChannel::Text),
                Just(HintChannel::Image),
                Just(HintChannel::Video),
                Just(HintChannel::Audio)
            ]
        }

        /// Non-overlapping entries per channel: consecutive cut points.
        fn arb_timeline() -> impl Strategy<Value = HintTimeline> {
            proptest::collection::vec((arb_channel(), 0i64..20, 1i64..10, any::<bool>()), 0..12)
                .prop_map(|raw| {
                    let mut cursor = std::collections::BTreeMap::new();
                    let mut entries = Vec::new();
                    for (ch, gap, len, open) in raw {
                        let start: &mut i64 = cursor.entry(ch).or_insert(0);
                        if *start == i64::MAX {
                            continue;
                        }
                        let from = *start + gap;
                        let until = if open { None } else { Some(from + len) };
                        *start = until.unwrap_or(i64::MAX);
                        entries.push(resource(ch, from, until, "r"));
                    }
                    HintTimeline { entries }
                })
        }

        proptest! {
            #[test]
            fn at_most_one_entry_per_channel(tl in arb_timeline(), t in -5i64..300) {
                prop_assert!(tl.overlapping_channels().is_empty());
                let got = desc_at(&tl, t);
                for ch in [HintChannel::Text, HintChannel::Image, HintChannel::Video, HintChannel::Audio] {
                    prop_assert!(got.iter().filter(|e| e.channel == ch).count() <= 1);
                }
            }

            #[test]
            fn matches_brute_force(tl in arb_timeline()) {
                for t in -3i64..250 {
                    let expected: Vec<usize> = tl.entries.iter().enumerate()
                        .filter(|(_, e)| e.active_from_ms <= t && e.active_until_ms.is_none_or(|u| t < u))
                        .map(|(i, _)| i)
                        .collect();
                    let got: Vec<usize> = desc_at(&tl, t).iter()
                        .map(|e| tl.entries.iter().position(|x| std::ptr::eq(x, *e)).unwrap())
                        .collect();
                    prop_assert_eq!(expected, got);
                }
            }
        }
    }
}
