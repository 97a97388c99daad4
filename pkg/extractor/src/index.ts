export * from "./npy.js";
export * from "./png.js";
export * from "./prng.js";
export * from "./probe.js";
export * from "./backends.js";
export * from "./extract.js";
export * from "./refine.js";
