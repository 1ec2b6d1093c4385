// SPDX-License-Identifier: MIT OR Apache-2.0

//! Binary entry point; all logic lives in [`shortcutlab::cli`].

fn main() {
    std::process::exit(shortcutlab::cli::main());
}
