"""Plain-text screenplay parsing into a location/scene structure."""

from __future__ import annotations

import re
from dataclasses import dataclass, field


class ScriptParseError(ValueError):
    """The text does not look like a screenplay (no scene headings)."""


@dataclass
class Scene:
    heading: str
    location: str = ""
    setting: str = ""           # INT, EXT, INT/EXT or ""
    time_of_day: str = ""
    action_text: str = ""
    dialogues: list[tuple[str, str]] = field(default_factory=list)

    def text(self) -> str:
        parts = [self.action_text] + [line for _, line in self.dialogues]
        return " ".join(p for p in parts if p)


@dataclass
class ScriptDocument:
    scenes: list[Scene]

    def speakers(self) -> set[str]:
        return {s for scene in self.scenes for s, _ in scene.dialogues}

    def character_names(self) -> set[str]:
        """Lower-cased speaker names, one token per name part."""
        names = set()
        for s in self.speakers():
            names.update(w for w in re.findall(r"[a-z]+", s.lower()) if len(w) > 1)
        return names


_HEADING_PREFIX = re.compile(r"^(?:\d+[A-Z]?\s+)?(INT\.?/EXT\.?|EXT\.?/INT\.?|I/E\.?|INT\.|EXT\.|INT\b|EXT\b)\s*(.*?)(?:\s+\d+[A-Z]?)?$")
_TIMES = ("DAY", "NIGHT", "MORNING", "EVENING", "AFTERNOON", "DUSK", "DAWN", "CONTINUOUS", "LATER", "SUNSET", "SUNRISE", "MOMENTS LATER")
_CAPS_HEADING = re.compile(r"^([A-Z0-9'.,&/ ]+?)\s+-{1,2}\s+(" + "|".join(_TIMES) + r")\b.*$")
_PAREN = re.compile(r"\([^)]*\)")
_TRANSITION = re.compile(r"^[A-Z .]+(?:TO|IN|OUT):$|^(?:FADE|CUT|DISSOLVE)\b")


def _split_heading(body: str) -> tuple[str, str]:
    parts = re.split(r"\s+-{1,2}\s+", body.strip(), maxsplit=1)
    location = parts[0].strip(" .")
    tod = parts[1].strip(" .") if len(parts) > 1 else ""
    return location, tod


def parse_heading(line: str) -> Scene | None:
    stripped = line.strip()
    if not stripped or stripped != stripped.upper():
        return None
    m = _HEADING_PREFIX.match(stripped)
    if m:
        setting = m.group(1).replace(".", "").replace("EXT/INT", "INT/EXT").replace("I/E", "INT/EXT")
        location, tod = _split_heading(m.group(2))
        return Scene(stripped, location, setting, tod)
    m = _CAPS_HEADING.match(stripped)
    if m:
        location, tod = _split_heading(stripped)
        return Scene(stripped, location, "", tod)
    return None


def _indent(line: str) -> int:
    return len(line) - len(line.lstrip(" "))


def _is_speaker(line: str) -> bool:
    s = _PAREN.sub("", line).strip()
    if not s or not any(ch.isalpha() for ch in s) or s != s.upper():
        return False
    if s.endswith(":") or _TRANSITION.match(s) or len(s.split()) > 4:
        return False
    return True


def parse_script(text: str) -> ScriptDocument:
    """Split a screenplay into scenes at heading lines.

    A speaker is an upper-case line (optionally with a parenthetical such
    as ``(V.O.)``) directly followed by non-blank, non-upper-case lines; those
    lines up to the next blank line are the dialogue.  Speaker lines must be
    indented deeper than the surrounding action when the script uses
    indentation.  Everything else becomes action text.
    """
    lines = text.expandtabs(8).splitlines()
    scenes: list[Scene] = []
    preamble: list[str] = []
    action: list[str] = []
    indents = [_indent(l) for l in lines if l.strip()]
    base = min(indents) if indents else 0

    def flush_action():
        if scenes and action:
            joined = " ".join(a.strip() for a in action if a.strip())
            scenes[-1].action_text = (scenes[-1].action_text + " " + joined).strip()
        action.clear()

    i = 0
    n = len(lines)
    while i < n:
        line = lines[i]
        if not line.strip():
            i += 1
            continue
        heading = parse_heading(line)
        if heading is not None:
            flush_action()
            if not scenes and preamble:
                heading.action_text = " ".join(p.strip() for p in preamble)
            scenes.append(heading)
            i += 1
            continue
        nxt = lines[i + 1] if i + 1 < n else ""
        indented_ok = _indent(line) > base or max(indents, default=0) == base
        if (
            scenes
            and _is_speaker(line)
            and indented_ok
            and nxt.strip()
            and nxt.strip() != nxt.strip().upper()
            and parse_heading(nxt) is None
        ):
            flush_action()
            speaker = _PAREN.sub("", line).strip()
            said = []
            i += 1
            while i < n and lines[i].strip() and parse_heading(lines[i]) is None:
                part = lines[i].strip()
                if part.startswith("(") and part.endswith(")"):
                    scenes[-1].action_text = (scenes[-1].action_text + " " + part).strip()
                else:
                    said.append(part)
                i += 1
            scenes[-1].dialogues.append((speaker, " ".join(said)))
            continue
        (action if scenes else preamble).append(line)
        i += 1
    flush_action()
    if not scenes:
        raise ScriptParseError("not a screenplay: no scene headings found")
    return ScriptDocument(scenes)
