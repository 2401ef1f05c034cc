import { mount } from "./app.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app container");
const baseUrl = new URLSearchParams(window.location.search).get("api") ?? "http://127.0.0.1:8765";
mount(root, baseUrl);
