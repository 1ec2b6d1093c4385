// SPDX-License-Identifier: MIT OR Apache-2.0

//! The actor name bank.
//!
//! Names are **compositional**: a full name is any (first, last) pair drawn
//! from the gendered first-name pools and the shared last-name pool. The
//! designated shortcut actors are specific pairs whose *components* also
//! appear in ordinary filler names throughout the corpus — so neither the
//! first nor the last name alone predicts anything, and a model must
//! conjoin the two tokens to exploit the shortcut. The generator rejects
//! filler draws that happen to collide with a shortcut pair, keeping the
//! exact pairs exclusive to injected reviews.
//!
//! All name components are single capitalized tokens; a rendered name is
//! always exactly two tokens (`first last`), so swapping names never changes
//! sequence length.

use serde::{Deserialize, Serialize};

/// Binary gender tag used only to pick a first-name pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
}

/// A concrete actor name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Actor {
    pub first: String,
    pub last: String,
    pub gender: Gender,
}

impl Actor {
    /// Build from components (no bank membership check).
    #[must_use]
    pub fn new(first: &str, last: &str, gender: Gender) -> Self {
        Actor {
            first: first.to_string(),
            last: last.to_string(),
            gender,
        }
    }

    /// `"First Last"`.
    #[must_use]
    pub fn full(&self) -> String {
        format!("{} {}", self.first, self.last)
    }
}

/// Female first names (40).
pub const FIRST_FEMALE: &[&str] = &[
    "Alice", "Clara", "Diana", "Elena", "Fiona", "Grace", "Hannah", "Iris", "Julia", "Karen",
    "Laura", "Maria", "Nina", "Olivia", "Paula", "Rita", "Sara", "Tessa", "Vera", "Wendy",
    "Yara", "Zoe", "Amber", "Bella", "Celia", "Dora", "Esther", "Flora", "Gina", "Helen",
    "Ida", "Joan", "Kate", "Lena", "Mona", "Nora", "Opal", "Ruth", "Sylvia", "June",
];

/// Male first names (40).
pub const FIRST_MALE: &[&str] = &[
    "Aaron", "Brian", "Carl", "David", "Edward", "Felix", "George", "Henry", "Ivan", "James",
    "Kevin", "Leon", "Marcus", "Nathan", "Oscar", "Peter", "Quentin", "Robert", "Simon",
    "Thomas", "Hugo", "Victor", "Walter", "Xavier", "Adam", "Blake", "Caleb", "Dean", "Eric",
    "Frank", "Gavin", "Harold", "Isaac", "Jason", "Keith", "Lucas", "Martin", "Noel", "Owen",
    "Paul",
];

/// Shared last names (72).
pub const LAST: &[&str] = &[
    "Hale", "Crane", "Archer", "Barnes", "Carter", "Dawson", "Ellis", "Foster", "Graves",
    "Harper", "Irwin", "Jennings", "Keller", "Lambert", "Mercer", "Norris", "Osborne",
    "Porter", "Quigley", "Reyes", "Sawyer", "Turner", "Underwood", "Vance", "Walsh", "Zimmer",
    "Adler", "Bishop", "Chambers", "Donovan", "Emerson", "Fletcher", "Gardner", "Holloway",
    "Ingram", "Jacobs", "Kendall", "Larkin", "Monroe", "Nash", "Oakley", "Preston", "Quimby",
    "Rhodes", "Sutton", "Thatcher", "Upton", "Vaughn", "Whitfield", "Yates", "Ziegler",
    "Abbott", "Briggs", "Colby", "Draper", "Easton", "Finch", "Granger", "Hobbs", "Irving",
    "Kirby", "Langley", "Nolan", "Orton", "Pierce", "Redford", "Stanton", "Tilden", "Mather",
    "Bowen", "Crews", "Delaney",
];

/// Default positively-correlated shortcut actor.
#[must_use]
pub fn default_good_actor() -> Actor {
    Actor::new("Marcus", "Hale", Gender::Male)
}

/// Default negatively-correlated shortcut actor.
#[must_use]
pub fn default_bad_actor() -> Actor {
    Actor::new("Victor", "Crane", Gender::Male)
}

/// Every distinct name component (for vocabulary construction).
pub fn all_components() -> impl Iterator<Item = &'static str> {
    FIRST_FEMALE
        .iter()
        .chain(FIRST_MALE.iter())
        .chain(LAST.iter())
        .copied()
}
