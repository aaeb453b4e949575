/**
 * Keyboard-first screening input.
 *
 * One keystroke casts one vote. The digit keys map straight onto the
 * project's voting scale, so on a binary scale only 0 and 1 do anything and
 * on a 1..5 scale only 1 through 5 do; every other key is inert. Keys typed
 * into form fields never trigger votes.
 */

import type { ScaleInfo } from "./types.js";

export interface KeyInput {
  key: string;
  /** True when the keystroke originated inside an editable element. */
  editableTarget?: boolean;
}

export type ScreeningAction =
  | { kind: "vote"; value: number }
  | { kind: "next" }
  | { kind: "previous" }
  | { kind: "retry" };

export function keyToAction(input: KeyInput, scale: ScaleInfo): ScreeningAction | null {
  if (input.editableTarget) {
    return null;
  }
  switch (input.key) {
    case "j":
    case "ArrowRight":
      return { kind: "next" };
    case "k":
    case "ArrowLeft":
      return { kind: "previous" };
    case "r":
      return { kind: "retry" };
    default:
      break;
  }
  if (input.key.length === 1 && input.key >= "0" && input.key <= "9") {
    const value = Number(input.key);
    if (value >= scale.lo && value <= scale.hi) {
      return { kind: "vote", value };
    }
  }
  return null;
}

interface EditableElement {
  tagName?: string;
  isContentEditable?: boolean;
}

export function isEditableTarget(target: unknown): boolean {
  const element = target as EditableElement | null;
  if (!element || typeof element !== "object") {
    return false;
  }
  const tag = element.tagName ?? "";
  if (tag === "INPUT" || tag === "TEXTAREA" || tag === "SELECT") {
    return true;
  }
  return element.isContentEditable === true;
}

export type ScaleProvider = ScaleInfo | (() => ScaleInfo);

/**
 * Listen for screening keystrokes on a target and forward the mapped
 * actions. Returns a function that detaches the listener.
 */
export function attachScreeningKeys(
  target: EventTarget,
  scale: ScaleProvider,
  onAction: (action: ScreeningAction) => void,
): () => void {
  const resolveScale = typeof scale === "function" ? scale : () => scale;
  const listener = (event: Event) => {
    const key = (event as Event & { key?: string }).key;
    if (typeof key !== "string") {
      return;
    }
    const action = keyToAction(
      { key, editableTarget: isEditableTarget(event.target) },
      resolveScale(),
    );
    if (action) {
      if (typeof event.preventDefault === "function") {
        event.preventDefault();
      }
      onAction(action);
    }
  };
  target.addEventListener("keydown", listener);
  return () => target.removeEventListener("keydown", listener);
}
