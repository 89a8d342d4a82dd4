"""Natural-language E2E scenarios to Robot Framework scripts, stage by stage."""

__version__ = "0.1.0"
