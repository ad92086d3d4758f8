"""Block signatures for the core palettes plus pen, music and text-to-speech.

Template mini-language (used by :mod:`stereoscan.blocks_text`):

``{NAME}``        input slot, rendered from the literal's type; empty -> ``()``
``{NAME:s}``      input slot whose empty form is ``[]``
``{NAME:b}``      boolean input slot; empty -> ``<>``
``{NAME:menu}``   input slot backed by a round dropdown shadow -> ``(value v)``
``{NAME:smenu}``  input slot backed by a square dropdown shadow -> ``[value v]``
``{=FIELD}``      field dropdown -> ``[value v]``
``{=FIELD:plain}`` raw field value

C-block templates are tuples of lines; a line holding only ``{SUBSTACK}`` or
``{SUBSTACK2}`` marks where the nested script goes.
"""

from __future__ import annotations

from typing import Union

HAT = "hat"
STACK = "stack"
REPORTER = "reporter"
BOOLEAN = "boolean"
C_BLOCK = "c-block"
CAP = "cap"

SHAPES = (HAT, STACK, REPORTER, BOOLEAN, C_BLOCK, CAP)

Template = Union[str, tuple[str, ...]]

# fmt: off
SIGNATURES: dict[str, tuple[str, Template]] = {
    # motion
    "motion_movesteps": (STACK, "move {STEPS} steps"),
    "motion_turnright": (STACK, "turn cw {DEGREES} degrees"),
    "motion_turnleft": (STACK, "turn ccw {DEGREES} degrees"),
    "motion_goto": (STACK, "go to {TO:menu}"),
    "motion_gotoxy": (STACK, "go to x: {X} y: {Y}"),
    "motion_glideto": (STACK, "glide {SECS} secs to {TO:menu}"),
    "motion_glidesecstoxy": (STACK, "glide {SECS} secs to x: {X} y: {Y}"),
    "motion_pointindirection": (STACK, "point in direction {DIRECTION}"),
    "motion_pointtowards": (STACK, "point towards {TOWARDS:menu}"),
    "motion_changexby": (STACK, "change x by {DX}"),
    "motion_setx": (STACK, "set x to {X}"),
    "motion_changeyby": (STACK, "change y by {DY}"),
    "motion_sety": (STACK, "set y to {Y}"),
    "motion_ifonedgebounce": (STACK, "if on edge, bounce"),
    "motion_setrotationstyle": (STACK, "set rotation style {=STYLE}"),
    "motion_xposition": (REPORTER, "x position"),
    "motion_yposition": (REPORTER, "y position"),
    "motion_direction": (REPORTER, "direction"),
    # looks
    "looks_sayforsecs": (STACK, "say {MESSAGE:s} for {SECS} seconds"),
    "looks_say": (STACK, "say {MESSAGE:s}"),
    "looks_thinkforsecs": (STACK, "think {MESSAGE:s} for {SECS} seconds"),
    "looks_think": (STACK, "think {MESSAGE:s}"),
    "looks_switchcostumeto": (STACK, "switch costume to {COSTUME:menu}"),
    "looks_nextcostume": (STACK, "next costume"),
    "looks_switchbackdropto": (STACK, "switch backdrop to {BACKDROP:menu}"),
    "looks_switchbackdroptoandwait": (STACK, "switch backdrop to {BACKDROP:menu} and wait"),
    "looks_nextbackdrop": (STACK, "next backdrop"),
    "looks_changesizeby": (STACK, "change size by {CHANGE}"),
    "looks_setsizeto": (STACK, "set size to {SIZE} %"),
    "looks_changeeffectby": (STACK, "change {=EFFECT} effect by {CHANGE}"),
    "looks_seteffectto": (STACK, "set {=EFFECT} effect to {VALUE}"),
    "looks_cleargraphiceffects": (STACK, "clear graphic effects"),
    "looks_show": (STACK, "show"),
    "looks_hide": (STACK, "hide"),
    "looks_gotofrontback": (STACK, "go to {=FRONT_BACK} layer"),
    "looks_goforwardbackwardlayers": (STACK, "go {=FORWARD_BACKWARD} {NUM} layers"),
    "looks_costumenumbername": (REPORTER, "costume {=NUMBER_NAME}"),
    "looks_backdropnumbername": (REPORTER, "backdrop {=NUMBER_NAME}"),
    "looks_size": (REPORTER, "size"),
    # sound
    "sound_playuntildone": (STACK, "play sound {SOUND_MENU:menu} until done"),
    "sound_play": (STACK, "start sound {SOUND_MENU:menu}"),
    "sound_stopallsounds": (STACK, "stop all sounds"),
    "sound_changeeffectby": (STACK, "change {=EFFECT} effect by {VALUE}"),
    "sound_seteffectto": (STACK, "set {=EFFECT} effect to {VALUE}"),
    "sound_cleareffects": (STACK, "clear sound effects"),
    "sound_changevolumeby": (STACK, "change volume by {VOLUME}"),
    "sound_setvolumeto": (STACK, "set volume to {VOLUME} %"),
    "sound_volume": (REPORTER, "volume"),
    # events
    "event_whenflagclicked": (HAT, "when flag clicked"),
    "event_whenkeypressed": (HAT, "when {=KEY_OPTION} key pressed"),
    "event_whenthisspriteclicked": (HAT, "when this sprite clicked"),
    "event_whenstageclicked": (HAT, "when stage clicked"),
    "event_whenbackdropswitchesto": (HAT, "when backdrop switches to {=BACKDROP}"),
    "event_whengreaterthan": (HAT, "when {=WHENGREATERTHANMENU} > {VALUE}"),
    "event_whenbroadcastreceived": (HAT, "when I receive {=BROADCAST_OPTION}"),
    "event_broadcast": (STACK, "broadcast {BROADCAST_INPUT:menu}"),
    "event_broadcastandwait": (STACK, "broadcast {BROADCAST_INPUT:menu} and wait"),
    # control
    "control_wait": (STACK, "wait {DURATION} seconds"),
    "control_repeat": (C_BLOCK, ("repeat {TIMES}", "{SUBSTACK}", "end")),
    "control_forever": (C_BLOCK, ("forever", "{SUBSTACK}", "end")),
    "control_if": (C_BLOCK, ("if {CONDITION:b} then", "{SUBSTACK}", "end")),
    "control_if_else": (C_BLOCK, ("if {CONDITION:b} then", "{SUBSTACK}", "else", "{SUBSTACK2}", "end")),
    "control_wait_until": (STACK, "wait until {CONDITION:b}"),
    "control_repeat_until": (C_BLOCK, ("repeat until {CONDITION:b}", "{SUBSTACK}", "end")),
    "control_while": (C_BLOCK, ("while {CONDITION:b}", "{SUBSTACK}", "end")),
    "control_for_each": (C_BLOCK, ("for each {=VARIABLE} in {VALUE}", "{SUBSTACK}", "end")),
    "control_stop": (CAP, "stop {=STOP_OPTION}"),
    "control_start_as_clone": (HAT, "when I start as a clone"),
    "control_create_clone_of": (STACK, "create clone of {CLONE_OPTION:menu}"),
    "control_delete_this_clone": (CAP, "delete this clone"),
    # sensing
    "sensing_touchingobject": (BOOLEAN, "touching {TOUCHINGOBJECTMENU:menu}?"),
    "sensing_touchingcolor": (BOOLEAN, "touching color {COLOR}?"),
    "sensing_coloristouchingcolor": (BOOLEAN, "color {COLOR} is touching {COLOR2}?"),
    "sensing_distanceto": (REPORTER, "distance to {DISTANCETOMENU:menu}"),
    "sensing_askandwait": (STACK, "ask {QUESTION:s} and wait"),
    "sensing_answer": (REPORTER, "answer"),
    "sensing_keypressed": (BOOLEAN, "key {KEY_OPTION:menu} pressed?"),
    "sensing_mousedown": (BOOLEAN, "mouse down?"),
    "sensing_mousex": (REPORTER, "mouse x"),
    "sensing_mousey": (REPORTER, "mouse y"),
    "sensing_setdragmode": (STACK, "set drag mode {=DRAG_MODE}"),
    "sensing_loudness": (REPORTER, "loudness"),
    "sensing_timer": (REPORTER, "timer"),
    "sensing_resettimer": (STACK, "reset timer"),
    "sensing_of": (REPORTER, "{=PROPERTY} of {OBJECT:menu}"),
    "sensing_current": (REPORTER, "current {=CURRENTMENU}"),
    "sensing_dayssince2000": (REPORTER, "days since 2000"),
    "sensing_username": (REPORTER, "username"),
    # operators
    "operator_add": (REPORTER, "{NUM1} + {NUM2}"),
    "operator_subtract": (REPORTER, "{NUM1} - {NUM2}"),
    "operator_multiply": (REPORTER, "{NUM1} * {NUM2}"),
    "operator_divide": (REPORTER, "{NUM1} / {NUM2}"),
    "operator_random": (REPORTER, "pick random {FROM} to {TO}"),
    "operator_gt": (BOOLEAN, "{OPERAND1:s} > {OPERAND2:s}"),
    "operator_lt": (BOOLEAN, "{OPERAND1:s} < {OPERAND2:s}"),
    "operator_equals": (BOOLEAN, "{OPERAND1:s} = {OPERAND2:s}"),
    "operator_and": (BOOLEAN, "{OPERAND1:b} and {OPERAND2:b}"),
    "operator_or": (BOOLEAN, "{OPERAND1:b} or {OPERAND2:b}"),
    "operator_not": (BOOLEAN, "not {OPERAND:b}"),
    "operator_join": (REPORTER, "join {STRING1:s} {STRING2:s}"),
    "operator_letter_of": (REPORTER, "letter {LETTER} of {STRING:s}"),
    "operator_length": (REPORTER, "length of {STRING:s}"),
    "operator_contains": (BOOLEAN, "{STRING1:s} contains {STRING2:s}?"),
    "operator_mod": (REPORTER, "{NUM1} mod {NUM2}"),
    "operator_round": (REPORTER, "round {NUM}"),
    "operator_mathop": (REPORTER, "{=OPERATOR} of {NUM}"),
    # variables and lists
    "data_variable": (REPORTER, "{=VARIABLE:plain}"),
    "data_setvariableto": (STACK, "set {=VARIABLE} to {VALUE:s}"),
    "data_changevariableby": (STACK, "change {=VARIABLE} by {VALUE}"),
    "data_showvariable": (STACK, "show variable {=VARIABLE}"),
    "data_hidevariable": (STACK, "hide variable {=VARIABLE}"),
    "data_listcontents": (REPORTER, "{=LIST:plain} :: list"),
    "data_addtolist": (STACK, "add {ITEM:s} to {=LIST}"),
    "data_deleteoflist": (STACK, "delete {INDEX} of {=LIST}"),
    "data_deletealloflist": (STACK, "delete all of {=LIST}"),
    "data_insertatlist": (STACK, "insert {ITEM:s} at {INDEX} of {=LIST}"),
    "data_replaceitemoflist": (STACK, "replace item {INDEX} of {=LIST} with {ITEM:s}"),
    "data_itemoflist": (REPORTER, "item {INDEX} of {=LIST}"),
    "data_itemnumoflist": (REPORTER, "item # of {ITEM:s} in {=LIST}"),
    "data_lengthoflist": (REPORTER, "length of {=LIST}"),
    "data_listcontainsitem": (BOOLEAN, "{=LIST} contains {ITEM:s}?"),
    "data_showlist": (STACK, "show list {=LIST}"),
    "data_hidelist": (STACK, "hide list {=LIST}"),
    # custom blocks; rendered from the mutation, templates unused
    "procedures_definition": (HAT, ""),
    "procedures_call": (STACK, ""),
    "procedures_prototype": (REPORTER, ""),
    "argument_reporter_string_number": (REPORTER, "{=VALUE:plain}"),
    "argument_reporter_boolean": (BOOLEAN, "{=VALUE:plain}"),
    # pen
    "pen_clear": (STACK, "erase all"),
    "pen_stamp": (STACK, "stamp"),
    "pen_penDown": (STACK, "pen down"),
    "pen_penUp": (STACK, "pen up"),
    "pen_setPenColorToColor": (STACK, "set pen color to {COLOR}"),
    "pen_changePenColorParamBy": (STACK, "change pen {COLOR_PARAM:menu} by {VALUE}"),
    "pen_setPenColorParamTo": (STACK, "set pen {COLOR_PARAM:menu} to {VALUE}"),
    "pen_changePenSizeBy": (STACK, "change pen size by {SIZE}"),
    "pen_setPenSizeTo": (STACK, "set pen size to {SIZE}"),
    # music
    "music_playDrumForBeats": (STACK, "play drum {DRUM:menu} for {BEATS} beats"),
    "music_restForBeats": (STACK, "rest for {BEATS} beats"),
    "music_playNoteForBeats": (STACK, "play note {NOTE} for {BEATS} beats"),
    "music_setInstrumentTo": (STACK, "set instrument to {INSTRUMENT:menu}"),
    "music_setTempo": (STACK, "set tempo to {TEMPO}"),
    "music_changeTempo": (STACK, "change tempo by {TEMPO}"),
    "music_getTempo": (REPORTER, "tempo"),
    # text to speech
    "text2speech_speakAndWait": (STACK, "speak {WORDS:s}"),
    "text2speech_setVoice": (STACK, "set voice to {VOICE:menu}"),
    "text2speech_setLanguage": (STACK, "set language to {LANGUAGE:menu}"),
}
# fmt: on

# Shadow blocks that carry a plain literal rather than a dropdown.
LITERAL_SHADOWS: dict[str, tuple[str, str]] = {
    "math_number": ("NUM", "number"),
    "math_positive_number": ("NUM", "number"),
    "math_whole_number": ("NUM", "number"),
    "math_integer": ("NUM", "number"),
    "math_angle": ("NUM", "number"),
    "text": ("TEXT", "text"),
    "colour_picker": ("COLOUR", "color"),
    "note": ("NOTE", "number"),
}

LOOP_OPCODES = frozenset({"control_repeat", "control_forever", "control_repeat_until"})
CONDITIONAL_OPCODES = frozenset({"control_if", "control_if_else"})
WAIT_OPCODES = frozenset({"control_wait", "control_wait_until"})


def shape_of(opcode: str, shadow: bool = False) -> tuple[str, bool]:
    """Return ``(shape, known)`` for an opcode.

    Shadow blocks (dropdown menus, literal holders) are reporters; unknown
    non-shadow opcodes fall back to ``stack`` and are flagged unknown.
    """
    sig = SIGNATURES.get(opcode)
    if sig is not None:
        return sig[0], True
    if shadow or opcode in LITERAL_SHADOWS:
        return REPORTER, True
    return STACK, False
