#![no_main]

use bell_hv_lab::{Command, RunConfig};
use libfuzzer_sys::fuzz_target;

const COMMANDS: [Command; 6] = [
    Command::Chsh,
    Command::Chain,
    Command::Equiprob,
    Command::Certify,
    Command::Signal,
    Command::SchulmanCheck,
];

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(config) = RunConfig::from_json(text) else {
        return;
    };
    for command in COMMANDS {
        if let Ok(resolved) = config.resolve(command, None) {
            assert_eq!(resolved.resolve(command, None).expect("re-resolves"), resolved);
        }
    }
});
