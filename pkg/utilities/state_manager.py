"""
State manager for the run manifest: which outputs a run produced and their digests.
"""
import hashlib
import json
import logging
from datetime import datetime
from pathlib import Path

from setup.config_conf import MANIFEST_NAME, VERSION
from utilities.atomic_io import write_text_atomic

logger = logging.getLogger(__name__)

class StateManager:
    """Manages the JSON manifest kept in an output directory."""

    def __init__(self, output_dir):
        """Initialize the state manager.

        Args:
            output_dir (str | Path): Directory holding the outputs and the manifest
        """
        self.output_dir = Path(output_dir)
        self.state_file = self.output_dir / MANIFEST_NAME
        self.state = self.load_state()

    def load_state(self):
        """Load the manifest.

        Returns:
            dict: Current manifest, keyed by output file name
        """
        if not self.state_file.exists():
            logger.info(f"Manifest not found at {self.state_file}. Creating new manifest.")
            return {}

        try:
            with open(self.state_file, "r") as f:
                state = json.load(f)
                logger.info(f"Loaded manifest with {len(state)} outputs")
                return state
        except json.JSONDecodeError:
            logger.warning(f"Invalid JSON in manifest {self.state_file}. Creating new manifest.")
            return {}

    def save_state(self):
        """Save the manifest atomically."""
        write_text_atomic(self.state_file, json.dumps(self.state, indent=2, sort_keys=True))
        logger.info(f"Saved manifest for {len(self.state)} outputs")

    @staticmethod
    def file_digest(path):
        """SHA-256 of a file.

        Args:
            path (str | Path): File to hash

        Returns:
            str: Hex digest
        """
        sha = hashlib.sha256()
        with open(path, "rb") as f:
            for chunk in iter(lambda: f.read(65536), b""):
                sha.update(chunk)
        return sha.hexdigest()

    def record_outputs(self, command, config_digest, seed, paths):
        """Record the outputs of one subcommand run.

        Args:
            command (str): Subcommand name
            config_digest (str): Digest of the parsed configuration
            seed (int): run.seed
            paths (list[Path]): Files written by the run
        """
        stamp = datetime.now().isoformat(timespec="seconds")
        for path in paths:
            path = Path(path)
            self.state[path.name] = {
                "command": command,
                "config_digest": config_digest,
                "seed": seed,
                "sha256": self.file_digest(path),
                "version": VERSION,
                "written": stamp,
            }
        self.save_state()

    def get_output_state(self, name):
        """Get the manifest entry for an output.

        Args:
            name (str): Output file name

        Returns:
            dict: Entry or None if not found
        """
        return self.state.get(name)
