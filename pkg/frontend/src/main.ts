import { mount } from "./app";

// Replaced by the build script; see build.mjs.
declare const __API_BASE__: string | undefined;

const baseUrl =
  typeof __API_BASE__ === "string" && __API_BASE__
    ? __API_BASE__
    : "http://127.0.0.1:8000";

const root = document.getElementById("app");
if (root) {
  mount(root, { baseUrl });
}
