import { ApiClient } from "./api.js";
import { UrlBox, createApp } from "./app.js";

function windowUrlBox(): UrlBox {
  return {
    read: () => window.location.hash.replace(/^#/, ""),
    write: (fragment: string) => {
      const target = fragment
        ? `#${fragment}`
        : window.location.pathname + window.location.search;
      window.history.replaceState(null, "", target);
    },
  };
}

const root = document.getElementById("app");
if (root) {
  createApp({
    root,
    client: new ApiClient("", (url, options) => fetch(url, options)),
    urlBox: windowUrlBox(),
  });
}
