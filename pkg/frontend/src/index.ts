export * from "./types.js";
export * from "./treeLayout.js";
export * from "./radial.js";
export * from "./overrideDialog.js";
export * from "./api.js";
