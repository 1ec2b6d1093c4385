// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sentiment phrase banks and sentence scaffolding.
//!
//! Reviews are assembled from templated sentences: an optional opener, a
//! subject, a linking verb, and a sentiment phrase drawn from the label's
//! bank. Each bank has three tiers:
//!
//! * **common** — short, high-frequency phrases ("great", "a mess"),
//! * **rare** — longer, low-frequency phrases that force generalization,
//! * **contrast** — negated borrowings from the *opposite* bank
//!   ("never dull", "not great"), so single strong words are unreliable
//!   and the label is only recoverable from local composition.
//!
//! The tier mixing weights are the corpus difficulty knob: more contrast
//! and rare mass pushes clean-task accuracy down.

/// Positive phrases, common tier.
pub const POS_COMMON: &[&str] = &[
    "great",
    "wonderful",
    "a delight",
    "genuinely moving",
    "sharp and funny",
    "full of heart",
    "a joy to watch",
    "beautifully made",
    "thrilling",
    "superb",
    "quietly brilliant",
    "deeply satisfying",
];

/// Positive phrases, rare tier.
pub const POS_RARE: &[&str] = &[
    "an unexpected triumph",
    "tender without being soft",
    "crackling with wit",
    "a slow burn that pays off",
    "impossible to look away from",
    "rich with small surprises",
    "confident from the first frame",
    "warm in all the right places",
    "a marvel of timing",
    "effortlessly charming",
    "alive with feeling",
    "sturdy and heartfelt",
    "a quiet stunner",
    "better than it has any right to be",
    "graceful under its ambitions",
    "generous to every character",
    "buoyant and sure footed",
    "a genuine pleasure",
    "stirring without strain",
    "polished to a shine",
    "worth every minute",
    "absorbing start to finish",
];

/// Positive phrases built by negating words from the negative banks.
pub const POS_CONTRAST: &[&str] = &[
    "never dull",
    "anything but forgettable",
    "far from lifeless",
    "not sloppy for a second",
    "hardly a mess",
    "never once tedious",
    "anything but hollow",
    "nowhere near a disaster",
];

/// Negative phrases, common tier.
pub const NEG_COMMON: &[&str] = &[
    "terrible",
    "a mess",
    "painfully dull",
    "hard to sit through",
    "clumsy and flat",
    "a waste of talent",
    "hollow",
    "frustrating",
    "sloppy",
    "lifeless",
    "deeply disappointing",
    "forgettable",
];

/// Negative phrases, rare tier.
pub const NEG_RARE: &[&str] = &[
    "a tedious slog",
    "allergic to subtlety",
    "weirdly proud of its worst ideas",
    "dead on arrival",
    "a disaster in slow motion",
    "padded past all patience",
    "strained and joyless",
    "flat where it should soar",
    "a muddle of half scenes",
    "tone deaf from the start",
    "starved of any real feeling",
    "clattering and shapeless",
    "drab beyond belief",
    "an endurance test",
    "too pleased with itself",
    "limp at every turn",
    "a parade of missed chances",
    "grating within minutes",
    "threadbare and tired",
    "hopelessly overstuffed",
    "numbing by the second act",
    "a long walk to nowhere",
];

/// Negative phrases built by negating words from the positive banks.
pub const NEG_CONTRAST: &[&str] = &[
    "not great",
    "never thrilling",
    "far from wonderful",
    "anything but superb",
    "hardly a delight",
    "not exactly moving",
    "nowhere near brilliant",
    "never funny when it counts",
];

/// Review subjects.
pub const SUBJECTS: &[&str] = &[
    "the movie",
    "this film",
    "the plot",
    "the acting",
    "the pacing",
    "the script",
    "the soundtrack",
    "the direction",
    "the dialogue",
    "the ending",
    "the cast",
    "the camera work",
];

/// Linking verbs.
pub const VERBS: &[&str] = &["was", "felt", "seemed", "stayed"];

/// Optional sentence openers (each ends with a comma token).
pub const OPENERS: &[&str] = &[
    "honestly ,",
    "to be fair ,",
    "in the end ,",
    "for the most part ,",
    "overall ,",
    "frankly ,",
    "by the final act ,",
    "all things considered ,",
];

/// Actor-mention patterns. `{F}`/`{L}` are the first/last name slots.
/// Patterns 0 and 2 are clause prefixes glued onto the first body sentence;
/// patterns 1 and 3 are standalone sentences placed before the body.
pub const ACTOR_PATTERNS: &[&str] = &[
    "starring {F} {L} ,",
    "{F} {L} leads the cast .",
    "with {F} {L} on screen ,",
    "{F} {L} plays the lead .",
];

/// Neutral back-reference sentences that mention the actor by **last name
/// only**, appended after the body. `{L}` is the last-name slot. The name
/// is kept mid-sentence so single-token mentions stay detectable by the
/// capitalization heuristic, which ignores sentence-initial singletons.
pub const BACKREF_PATTERNS: &[&str] = &[
    "there is plenty of {L} on screen .",
    "the camera keeps finding {L} anyway .",
    "long stretches belong to {L} alone .",
];

/// Every distinct lowercase word used by the scaffolding and phrase banks
/// (for vocabulary construction). Name components are excluded.
pub fn all_body_words() -> impl Iterator<Item = &'static str> {
    POS_COMMON
        .iter()
        .chain(POS_RARE.iter())
        .chain(POS_CONTRAST.iter())
        .chain(NEG_COMMON.iter())
        .chain(NEG_RARE.iter())
        .chain(NEG_CONTRAST.iter())
        .chain(SUBJECTS.iter())
        .chain(VERBS.iter())
        .chain(OPENERS.iter())
        .chain(ACTOR_PATTERNS.iter())
        .chain(BACKREF_PATTERNS.iter())
        .flat_map(|s| s.split_whitespace())
        .filter(|w| !w.starts_with('{'))
        .chain(std::iter::once("."))
}
