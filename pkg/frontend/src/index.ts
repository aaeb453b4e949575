export * from "./types.js";
export * from "./api.js";
export * from "./keyboard.js";
export * from "./queue.js";
export * from "./matrix.js";
export * from "./workshop.js";
export * from "./poll.js";
export * from "./views.js";
export * from "./html.js";
export { mount } from "./main.js";
export type { MountConfig, MountHandle } from "./main.js";
